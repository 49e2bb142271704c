#pragma once

#include "relgraph/extract.hpp"
#include "relgraph/graph_json.hpp"
#include "relgraph/provider.hpp"
#include "relgraph/retrieval.hpp"

#include <memory>
#include <optional>
#include <string>

namespace relgraph {

struct RetrievalConfig {
    std::size_t chunk_chars = 800;
    std::size_t overlap_chars = 200;
    std::size_t k = 4;
};

/// Shared by the service and the CLI. JSON file:
///
///   {"host": "127.0.0.1", "port": 8080, "data_dir": "...", "static_dir": "...",
///    "kb": "<path>", "log_requests": true,
///    "provider": {"kind": "http", "base_url": ..., "model": ..., "api_key": ...,
///                 "timeout_s": 60}
///              | {"kind": "scripted", "replies": [...], "match": [...]},
///    "embedder": {"kind": "hash", "dim": 256} | {"kind": "http", ...},
///    "extraction": {"n_c": 5, ...}, "retrieval": {"chunk_chars": 800, ...}}
///
/// RELGRAPH_* environment variables override the file (see README).
struct AppConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string data_dir = "relgraph-data";
    std::string static_dir;
    std::string kb_path;
    bool log_requests = true;
    int long_poll_max_s = 30;
    Json provider = Json::object();
    Json embedder = Json{{"kind", "hash"}, {"dim", 256}};
    ExtractionConfig extraction;
    RetrievalConfig retrieval;
};

AppConfig config_from_json(const Json& j);
/// Reads `path` when non-empty, then applies environment overrides.
AppConfig load_config(const std::string& path = {});

Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);

/// Throws ValidationError (code "no_provider") when `config` names none.
std::unique_ptr<Provider> make_provider(const Json& config);
std::unique_ptr<Embedder> make_embedder(const Json& config);

} // namespace relgraph
