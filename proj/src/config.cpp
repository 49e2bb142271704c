#include "relgraph/config.hpp"

#include "relgraph/error.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace relgraph {

namespace {

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

HttpEndpoint endpoint_from(const Json& j) {
    HttpEndpoint e;
    e.base_url = j.value("base_url", std::string{});
    e.model = j.value("model", std::string{});
    e.api_key = j.value("api_key", std::string{});
    e.timeout_s = j.value("timeout_s", 60.0);
    if (e.base_url.empty()) throw ValidationError("http endpoint needs base_url");
    return e;
}

} // namespace

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("parse_error", 0, path + ": " + e.what());
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

AppConfig config_from_json(const Json& j) {
    AppConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    try {
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.data_dir = j.value("data_dir", c.data_dir);
        c.static_dir = j.value("static_dir", c.static_dir);
        c.kb_path = j.value("kb", c.kb_path);
        c.log_requests = j.value("log_requests", c.log_requests);
        c.long_poll_max_s = j.value("long_poll_max_s", c.long_poll_max_s);
        if (j.contains("provider")) c.provider = j["provider"];
        if (j.contains("embedder")) c.embedder = j["embedder"];
        if (j.contains("extraction")) {
            c.extraction = extraction_config_from_json(j["extraction"], c.extraction);
        }
        if (j.contains("retrieval")) {
            const Json& r = j["retrieval"];
            c.retrieval.chunk_chars = r.value("chunk_chars", c.retrieval.chunk_chars);
            c.retrieval.overlap_chars = r.value("overlap_chars", c.retrieval.overlap_chars);
            c.retrieval.k = r.value("k", c.retrieval.k);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad config: ") + e.what());
    }
    if (c.retrieval.overlap_chars >= c.retrieval.chunk_chars || c.retrieval.k == 0) {
        throw ValidationError("retrieval needs overlap < chunk and k >= 1");
    }
    return c;
}

AppConfig load_config(const std::string& path) {
    AppConfig c = path.empty() ? AppConfig{} : config_from_json(read_json_file(path));
    if (auto v = env("RELGRAPH_HOST")) c.host = *v;
    if (auto v = env("RELGRAPH_PORT")) c.port = std::stoi(*v);
    if (auto v = env("RELGRAPH_DATA_DIR")) c.data_dir = *v;
    if (auto v = env("RELGRAPH_STATIC_DIR")) c.static_dir = *v;
    if (auto v = env("RELGRAPH_KB")) c.kb_path = *v;
    if (auto v = env("RELGRAPH_PROVIDER_URL")) {
        c.provider["kind"] = "http";
        c.provider["base_url"] = *v;
    }
    if (auto v = env("RELGRAPH_PROVIDER_MODEL")) c.provider["model"] = *v;
    if (auto v = env("RELGRAPH_PROVIDER_KEY")) c.provider["api_key"] = *v;
    if (auto v = env("RELGRAPH_EMBEDDER_URL")) {
        c.embedder = Json{{"kind", "http"}, {"base_url", *v}};
    }
    if (auto v = env("RELGRAPH_EMBEDDER_MODEL")) c.embedder["model"] = *v;
    if (auto v = env("RELGRAPH_EMBEDDER_KEY")) c.embedder["api_key"] = *v;
    return c;
}

std::unique_ptr<Provider> make_provider(const Json& config) {
    const std::string kind = config.is_object() ? config.value("kind", std::string{}) : "";
    if (kind == "scripted") {
        if (config.contains("script")) {
            return ScriptedProvider::from_json(read_json_file(config["script"].get<std::string>()));
        }
        return ScriptedProvider::from_json(config);
    }
    if (kind == "http") return std::make_unique<HttpProvider>(endpoint_from(config));
    if (kind.empty()) throw ValidationError("no provider configured", "no_provider");
    throw ValidationError("unknown provider kind '" + kind + "'");
}

std::unique_ptr<Embedder> make_embedder(const Json& config) {
    const std::string kind = config.is_object() ? config.value("kind", std::string{"hash"}) : "hash";
    if (kind == "hash") return std::make_unique<HashEmbedder>(config.value("dim", std::size_t{256}));
    if (kind == "http") {
        return std::make_unique<HttpEmbedder>(endpoint_from(config), config.value("dim", std::size_t{0}));
    }
    throw ValidationError("unknown embedder kind '" + kind + "'");
}

} // namespace relgraph
