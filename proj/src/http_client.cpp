#include "relgraph/error.hpp"
#include "relgraph/provider.hpp"
#include "relgraph/retrieval.hpp"

#include <httplib.h>

namespace relgraph {

namespace {

// "https://host:port/v1" -> ("https://host:port", "/v1")
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ValidationError("base_url needs a scheme: " + url);
    const auto path = url.find('/', scheme + 3);
    if (path == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path), prefix};
}

} // namespace

Json post_json(const HttpEndpoint& endpoint, const std::string& path, const Json& body) {
    const auto [host, prefix] = split_url(endpoint.base_url);
    httplib::Client client(host);
    const auto secs = static_cast<time_t>(endpoint.timeout_s);
    const auto usecs = static_cast<time_t>((endpoint.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!endpoint.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    const auto res = client.Post(prefix + path, headers, body.dump(), "application/json");
    if (!res) throw ProviderError("request to " + endpoint.base_url + path + " failed: " +
                                  httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
        throw ProviderError("HTTP " + std::to_string(res->status) + " from " + endpoint.base_url +
                            path + ": " + res->body.substr(0, 200));
    }
    try {
        return Json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProviderError(std::string("response is not JSON: ") + e.what());
    }
}

HttpProvider::HttpProvider(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpProvider::complete(const std::string& prompt, double temperature) {
    Json body;
    body["model"] = endpoint_.model;
    body["temperature"] = temperature;
    body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt}}});
    const Json res = post_json(endpoint_, "/chat/completions", body);
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw ProviderError("unexpected chat completion shape");
    }
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, std::size_t dim)
    : endpoint_(std::move(endpoint)), dim_(dim) {}

std::vector<std::vector<double>> HttpEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    Json body;
    body["model"] = endpoint_.model;
    body["input"] = texts;
    const Json res = post_json(endpoint_, "/embeddings", body);
    std::vector<std::vector<double>> out(texts.size());
    try {
        for (const auto& item : res.at("data")) {
            const auto i = item.value("index", std::size_t{0});
            if (i >= out.size()) throw ProviderError("embedding index out of range");
            out[i] = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception&) {
        throw ProviderError("unexpected embeddings shape");
    }
    for (auto& v : out) {
        if (v.empty()) throw ProviderError("missing embedding in response");
        if (dim_ == 0) dim_ = v.size();
        if (v.size() != dim_) throw ProviderError("embedding dimension mismatch");
        normalize(v);
    }
    return out;
}

} // namespace relgraph
