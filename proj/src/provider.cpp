#include "relgraph/provider.hpp"

#include "relgraph/error.hpp"

namespace relgraph {

ScriptedProvider::ScriptedProvider(std::vector<Json> replies) {
    fallback_.replies = std::move(replies);
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_json(const Json& config) {
    auto p = std::make_unique<ScriptedProvider>();
    if (config.is_array()) {
        p->fallback_.replies = config.get<std::vector<Json>>();
        return p;
    }
    if (!config.is_object()) throw ValidationError("scripted provider config must be an object");
    if (config.contains("replies")) p->fallback_.replies = config["replies"].get<std::vector<Json>>();
    for (const auto& m : config.value("match", Json::array())) {
        p->add_rule(m.value("contains", std::string{}), m.value("replies", std::vector<Json>{}));
    }
    return p;
}

void ScriptedProvider::add_rule(std::string contains, std::vector<Json> replies) {
    std::lock_guard lock(mu_);
    rules_.push_back({std::move(contains), Script{std::move(replies), 0}});
}

std::string ScriptedProvider::take(Script& script) {
    if (script.replies.empty()) throw ProviderError("scripted provider has no reply");
    const Json& reply = script.replies[std::min(script.next, script.replies.size() - 1)];
    ++script.next;
    if (reply.is_object() && reply.contains("error")) {
        throw ProviderError(reply["error"].is_string() ? reply["error"].get<std::string>()
                                                       : reply["error"].dump());
    }
    return reply.is_string() ? reply.get<std::string>() : reply.dump();
}

std::string ScriptedProvider::complete(const std::string& prompt, double /*temperature*/) {
    std::lock_guard lock(mu_);
    prompts_.push_back(prompt);
    for (auto& rule : rules_) {
        if (prompt.find(rule.contains) != std::string::npos) return take(rule.script);
    }
    return take(fallback_);
}

std::size_t ScriptedProvider::calls() const {
    std::lock_guard lock(mu_);
    return prompts_.size();
}

std::vector<std::string> ScriptedProvider::prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
}

} // namespace relgraph
