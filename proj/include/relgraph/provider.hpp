#pragma once

#include "relgraph/graph_json.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace relgraph {

/// Text-in/text-out generation backend. Implementations must be safe to call
/// from several threads.
class Provider {
public:
    virtual ~Provider() = default;
    /// Throws ProviderError on transport or backend failure.
    virtual std::string complete(const std::string& prompt, double temperature) = 0;
    virtual std::string name() const = 0;
};

/// Replays canned outputs. Each reply is either a string or {"error": msg},
/// which makes that call throw ProviderError.
///
/// Config:
///   {"replies": [...], "match": [{"contains": "...", "replies": [...]}]}
/// A prompt is served by the first match rule whose substring occurs in it,
/// otherwise by the top-level list. Each list is consumed in order and its
/// last entry repeats once exhausted.
class ScriptedProvider final : public Provider {
public:
    ScriptedProvider() = default;
    explicit ScriptedProvider(std::vector<Json> replies);
    static std::unique_ptr<ScriptedProvider> from_json(const Json& config);

    void add_rule(std::string contains, std::vector<Json> replies);

    std::string complete(const std::string& prompt, double temperature) override;
    std::string name() const override { return "scripted"; }

    std::size_t calls() const;
    std::vector<std::string> prompts() const;

private:
    struct Script {
        std::vector<Json> replies;
        std::size_t next = 0;
    };
    struct Rule {
        std::string contains;
        Script script;
    };

    static std::string take(Script& script);

    mutable std::mutex mu_;
    Script fallback_;
    std::vector<Rule> rules_;
    std::vector<std::string> prompts_;
};

struct HttpEndpoint {
    std::string base_url;  // e.g. https://api.example.com/v1
    std::string model;
    std::string api_key;
    double timeout_s = 60.0;
};

/// Chat-completions style endpoint: POST <base_url>/chat/completions.
class HttpProvider final : public Provider {
public:
    explicit HttpProvider(HttpEndpoint endpoint);
    std::string complete(const std::string& prompt, double temperature) override;
    std::string name() const override { return "http:" + endpoint_.model; }

private:
    HttpEndpoint endpoint_;
};

/// POSTs `body` as JSON to base_url + path and returns the parsed response.
/// Throws ProviderError on transport errors and non-2xx statuses.
Json post_json(const HttpEndpoint& endpoint, const std::string& path, const Json& body);

} // namespace relgraph
