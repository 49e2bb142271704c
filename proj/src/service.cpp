#include "relgraph/service.hpp"

#include "relgraph/error.hpp"
#include "relgraph/extract.hpp"
#include "relgraph/metrics.hpp"
#include "relgraph/unicode.hpp"

#include <httplib.h>

#include <algorithm>
#include <iostream>

namespace relgraph {

namespace {

using Req = httplib::Request;
using Res = httplib::Response;

int http_status(const std::string& code) {
    if (code == "not_found") return 404;
    if (code == "stale_revision") return 409;
    if (code == "bad_json") return 400;
    if (code == "no_provider") return 503;
    if (code == "provider") return 502;
    if (code == "io" || code == "corrupt_log") return 500;
    return 422;
}

void send(Res& res, const Json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(Res& res, const std::string& code, const std::string& message) {
    send(res, Json{{"error", {{"code", code}, {"message", message}}}}, http_status(code));
}

Json body_of(const Req& req) {
    if (req.body.empty()) return Json::object();
    Json j;
    try {
        j = Json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("bad_json", std::string("request body is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("bad_json", "request body must be a JSON object");
    return j;
}

std::optional<std::uint64_t> expected_revision(const Req& req, const Json& body) {
    if (body.contains("revision") && !body["revision"].is_null()) {
        if (!body["revision"].is_number_unsigned()) {
            throw ValidationError("revision must be a non-negative integer", "bad_field");
        }
        return body["revision"].get<std::uint64_t>();
    }
    if (req.has_header("If-Match")) {
        std::string v = req.get_header_value("If-Match");
        if (v.starts_with("W/")) v = v.substr(2);
        std::erase(v, '"');
        try {
            return std::stoull(v);
        } catch (const std::exception&) {
            throw ValidationError("If-Match must carry a revision number", "bad_field");
        }
    }
    return std::nullopt;
}

std::size_t query_size(const Req& req, const char* name, std::size_t fallback) {
    if (!req.has_param(name)) return fallback;
    try {
        return std::stoull(req.get_param_value(name));
    } catch (const std::exception&) {
        throw ValidationError(std::string("query parameter '") + name + "' must be a number",
                              "bad_field");
    }
}

template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const Req& req, Res& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, "bad_field", e.what());
        } catch (const std::exception& e) {
            send_error(res, "internal", e.what());
            res.status = 500;
        }
    };
}

const Conflict* find_open(const SessionState& s, const std::string& cid) {
    for (const auto& c : s.conflicts) {
        if (c.id() == cid) return &c;
    }
    return nullptr;
}

Json kb_view(const RuleKB& kb) {
    Json relations = Json::array();
    for (const auto& [id, r] : kb.relations()) {
        relations.push_back(Json{{"id", id},
                                 {"display", kb.display(id)},
                                 {"notes", r.notes},
                                 {"self", r.self_allowed}});
    }
    Json rules = Json::array();
    for (const auto& r : kb.rules()) rules.push_back(r.to_line());
    Json diags = Json::array();
    for (const auto& d : validate_kb(kb)) {
        Json rs = Json::array();
        for (const auto& r : d.rules) rs.push_back(r.to_line());
        diags.push_back(Json{{"severity", d.severity == Severity::error ? "error" : "warning"},
                             {"message", d.message},
                             {"rules", rs}});
    }
    return Json{{"version", kb.version()},
                {"text", save_kb(kb)},
                {"relations", relations},
                {"rules", rules},
                {"diagnostics", diags}};
}

} // namespace

Service::Service(AppConfig config, std::shared_ptr<Provider> provider,
                 std::shared_ptr<Embedder> embedder)
    : config_(std::move(config)),
      provider_(std::move(provider)),
      embedder_(embedder ? std::move(embedder) : std::make_shared<HashEmbedder>()),
      store_(std::make_unique<SessionStore>(config_.data_dir)),
      server_(std::make_unique<httplib::Server>()) {
    store_->load_all();
    routes();
}

Service::~Service() { stop(); }

int Service::bind() {
    if (config_.port == 0) {
        port_ = server_->bind_to_any_port(config_.host);
    } else {
        port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (port_ <= 0) throw Error("io", "cannot bind " + config_.host + ":" + std::to_string(config_.port));
    return port_;
}

void Service::run() { server_->listen_after_bind(); }

void Service::start() {
    bind();
    thread_ = std::thread([this] { run(); });
    server_->wait_until_ready();
}

void Service::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

void Service::routes() {
    auto& srv = *server_;
    SessionStore& store = *store_;

    if (config_.log_requests) {
        srv.set_logger([](const Req& req, const Res& res) {
            std::cerr << Json{{"method", req.method}, {"path", req.path}, {"status", res.status}}.dump()
                      << '\n';
        });
    }
    if (!config_.static_dir.empty()) srv.set_mount_point("/", config_.static_dir);

    const auto need_provider = [this]() -> Provider& {
        if (!provider_) throw ValidationError("no text-generation provider is configured", "no_provider");
        return *provider_;
    };
    const auto respond_mutation = [](Res& res, const SessionStore::Mutation& m, int status = 200) {
        Json out = m.result;
        out["revision"] = m.state->revision;
        send(res, out, status);
    };

    srv.Get("/healthz", guarded([](const Req&, Res& res) { send(res, Json{{"ok", true}}); }));

    srv.Get("/sessions", guarded([&store](const Req&, Res& res) {
        send(res, Json{{"sessions", store.ids()}});
    }));

    srv.Post("/sessions", guarded([this, &store](const Req& req, Res& res) {
        const Json body = body_of(req);
        if (!body.contains("text") || !body["text"].is_string()) {
            throw ValidationError("field 'text' is required", "missing_field");
        }
        Document doc{body.value("doc_id", std::string{}), unicode::nfc(body["text"].get<std::string>()),
                     body.value("title", std::string{})};
        std::string kb_text;
        if (body.contains("kb") && body["kb"].is_string()) {
            kb_text = body["kb"].get<std::string>();
        } else if (!config_.kb_path.empty()) {
            kb_text = read_text_file(config_.kb_path);
        } else {
            kb_text = std::string(builtin_kb_text());
        }
        const std::string id = store.create(std::move(doc), kb_text);
        send(res, Json{{"session_id", id}, {"revision", store.get(id)->revision}}, 201);
    }));

    srv.Get(R"(/sessions/([^/]+))", guarded([&store](const Req& req, Res& res) {
        const auto s = store.get(req.matches[1]);
        send(res, Json{{"session_id", s->id},
                       {"revision", s->revision},
                       {"doc", {{"id", s->doc.id}, {"title", s->doc.title}, {"text", s->doc.text}}},
                       {"kb_version", s->kb.version()}});
    }));

    srv.Get(R"(/sessions/([^/]+)/graph)", guarded([this, &store](const Req& req, Res& res) {
        const std::string id = req.matches[1];
        auto state = store.get(id);
        if (req.has_param("revision_after")) {
            const auto after = query_size(req, "revision_after", 0);
            if (state->revision <= after) {
                const auto wait_s = std::min<std::size_t>(query_size(req, "wait", 25),
                                                          static_cast<std::size_t>(config_.long_poll_max_s));
                state = store.wait_newer(id, after, std::chrono::seconds(wait_s));
                if (!state) {
                    res.status = 204;
                    return;
                }
            }
        }
        send(res, served_graph(*state));
    }));

    srv.Get(R"(/sessions/([^/]+)/progress)", guarded([&store](const Req& req, Res& res) {
        const Progress p = store.progress(req.matches[1]);
        send(res, Json{{"stage", p.stage}, {"done", p.done}, {"total", p.total}});
    }));

    srv.Post(R"(/sessions/([^/]+)/extract/characters)",
             guarded([this, &store, need_provider](const Req& req, Res& res) {
                 const std::string id = req.matches[1];
                 const Json body = body_of(req);
                 const auto state = store.get(id);
                 const auto cfg = extraction_config_from_json(body.value("config", Json()), config_.extraction);
                 Provider& provider = need_provider();
                 store.set_progress(id, {"characters", 0, cfg.n_c});
                 CharacterExtraction ex;
                 try {
                     ex = extract_characters(state->doc, cfg, provider, [&](int done, int total) {
                         store.set_progress(id, {"characters", done, total});
                     });
                 } catch (...) {
                     store.set_progress(id, {});
                     throw;
                 }
                 store.set_progress(id, {});
                 Json cands = Json::array();
                 for (const auto& c : ex.candidates) cands.push_back(to_json(c));
                 const auto m = store.mutate(
                     id, Json{{"type", "ingest_characters"}, {"candidates", cands}},
                     expected_revision(req, body));
                 Json rejects = Json::array();
                 for (const auto& r : ex.rejects) rejects.push_back(to_json(r));
                 Json out = m.result;
                 out["candidates"] = cands;
                 out["rejects"] = rejects;
                 out["runs"] = cfg.n_c;
                 out["failed_runs"] = ex.failed_runs;
                 out["revision"] = m.state->revision;
                 send(res, out);
             }));

    srv.Post(R"(/sessions/([^/]+)/extract/relations)",
             guarded([this, &store, need_provider](const Req& req, Res& res) {
                 const std::string id = req.matches[1];
                 const Json body = body_of(req);
                 const auto state = store.get(id);
                 const auto cfg = extraction_config_from_json(body.value("config", Json()), config_.extraction);
                 std::vector<Entity> confirmed;
                 for (const auto& [_, e] : state->graph.entities) {
                     if (e.status == EntityStatus::confirmed) confirmed.push_back(e);
                 }
                 if (confirmed.empty()) {
                     throw ValidationError("confirm at least one character first", "no_confirmed_entities");
                 }
                 Provider& provider = need_provider();
                 store.set_progress(id, {"relations", 0, cfg.n_e});
                 RelationExtraction ex;
                 try {
                     ex = extract_relations(state->doc, confirmed, state->kb, cfg, provider,
                                            [&](int done, int total) {
                                                store.set_progress(id, {"relations", done, total});
                                            });
                 } catch (...) {
                     store.set_progress(id, {});
                     throw;
                 }
                 store.set_progress(id, {});
                 Json cands = Json::array();
                 for (const auto& c : ex.candidates) cands.push_back(to_json(c));
                 const auto m = store.mutate(
                     id, Json{{"type", "ingest_relations"}, {"candidates", cands}},
                     expected_revision(req, body));
                 Json rejects = Json::array();
                 for (const auto& r : ex.rejects) rejects.push_back(to_json(r));
                 Json out = m.result;
                 out["candidates"] = cands;
                 out["rejects"] = rejects;
                 out["runs"] = cfg.n_e;
                 out["failed_runs"] = ex.failed_runs;
                 out["revision"] = m.state->revision;
                 send(res, out);
             }));

    srv.Post(R"(/sessions/([^/]+)/entities)",
             guarded([&store, respond_mutation](const Req& req, Res& res) {
                 Json body = body_of(req);
                 const auto rev = expected_revision(req, body);
                 body.erase("revision");
                 body["type"] = "entity_add";
                 respond_mutation(res, store.mutate(req.matches[1], body, rev), 201);
             }));

    srv.Post(R"(/sessions/([^/]+)/entities/merge)",
             guarded([&store, respond_mutation](const Req& req, Res& res) {
                 const Json body = body_of(req);
                 const Json event{{"type", "merge"},
                                  {"keep", body.value("keep", std::string{})},
                                  {"absorb", body.value("absorb", std::string{})}};
                 respond_mutation(res, store.mutate(req.matches[1], event, expected_revision(req, body)));
             }));

    srv.Patch(R"(/sessions/([^/]+)/entities/([^/]+))",
              guarded([&store, respond_mutation](const Req& req, Res& res) {
                  Json body = body_of(req);
                  const auto rev = expected_revision(req, body);
                  Json event{{"type", "entity_update"}, {"id", req.matches[2]}};
                  for (const char* f : {"status", "canonical", "aliases"}) {
                      if (body.contains(f)) event[f] = body[f];
                  }
                  respond_mutation(res, store.mutate(req.matches[1], event, rev));
              }));

    srv.Delete(R"(/sessions/([^/]+)/entities/([^/]+))",
               guarded([&store, respond_mutation](const Req& req, Res& res) {
                   const Json body = body_of(req);
                   const Json event{{"type", "entity_delete"}, {"id", req.matches[2]}};
                   respond_mutation(res, store.mutate(req.matches[1], event, expected_revision(req, body)));
               }));

    srv.Post(R"(/sessions/([^/]+)/entities/([^/]+)/split)",
             guarded([&store, respond_mutation](const Req& req, Res& res) {
                 const Json body = body_of(req);
                 const Json event{{"type", "split"},
                                  {"id", req.matches[2]},
                                  {"parts", body.value("parts", Json::array())},
                                  {"assignment", body.value("assignment", Json::object())}};
                 respond_mutation(res, store.mutate(req.matches[1], event, expected_revision(req, body)));
             }));

    srv.Post(R"(/sessions/([^/]+)/triples)",
             guarded([&store, respond_mutation](const Req& req, Res& res) {
                 const Json body = body_of(req);
                 const Json event{{"type", "triple_add"},
                                  {"src", body.value("src", std::string{})},
                                  {"rel", body.value("rel", std::string{})},
                                  {"dst", body.value("dst", std::string{})}};
                 respond_mutation(res, store.mutate(req.matches[1], event, expected_revision(req, body)));
             }));

    srv.Patch(R"(/sessions/([^/]+)/triples/([^/]+))",
              guarded([&store, respond_mutation](const Req& req, Res& res) {
                  const Json body = body_of(req);
                  const Json event{{"type", "triple_status"},
                                   {"key", std::string(req.matches[2])},
                                   {"status", body.value("status", std::string{})}};
                  respond_mutation(res, store.mutate(req.matches[1], event, expected_revision(req, body)));
              }));

    srv.Delete(R"(/sessions/([^/]+)/triples/([^/]+))",
               guarded([&store, respond_mutation](const Req& req, Res& res) {
                   const Json body = body_of(req);
                   const Json event{{"type", "triple_delete"}, {"key", std::string(req.matches[2])}};
                   respond_mutation(res, store.mutate(req.matches[1], event, expected_revision(req, body)));
               }));

    srv.Get(R"(/sessions/([^/]+)/evidence)", guarded([this, &store](const Req& req, Res& res) {
        const std::string id = req.matches[1];
        const auto state = store.get(id);
        const std::size_t k = query_size(req, "k", config_.retrieval.k);
        const auto idx = store.index(id, *embedder_, config_.retrieval.chunk_chars,
                                     config_.retrieval.overlap_chars);
        std::string query;
        Json out;
        if (req.has_param("conflict")) {
            const std::string cid = req.get_param_value("conflict");
            const Conflict* c = find_open(*state, cid);
            if (c == nullptr) throw NotFound("no open conflict '" + cid + "'");
            query = render_query(*c, state->graph, state->kb);
            out["conflict_id"] = cid;
        } else if (req.has_param("triple")) {
            const TripleKey key = TripleKey::parse(req.get_param_value("triple"));
            if (!state->graph.triples.contains(key)) throw NotFound("unknown triple " + key.str());
            query = render_statement(key, state->graph, state->kb);
            out["triple"] = key.str();
        } else {
            throw ValidationError("pass conflict=<id> or triple=<key>", "missing_field");
        }
        Json evidence = Json::array();
        for (const auto& e : retrieve(*idx, query, k, *embedder_)) evidence.push_back(to_json(e));
        out["query"] = query;
        out["evidence"] = std::move(evidence);
        out["revision"] = state->revision;
        send(res, out);
    }));

    srv.Post(R"(/sessions/([^/]+)/conflicts/([^/]+)/resolve)",
             guarded([this, &store, need_provider](const Req& req, Res& res) {
                 const std::string id = req.matches[1];
                 const std::string cid = req.matches[2];
                 const Json body = body_of(req);
                 const auto rev = expected_revision(req, body);
                 const auto state = store.get(id);
                 const Conflict* c = find_open(*state, cid);
                 if (c == nullptr) throw NotFound("no open conflict '" + cid + "'");
                 const std::string mode = body.value("mode", std::string{"auto"});

                 if (mode == "choice") {
                     const auto prompt = build_resolution_prompt(*c, state->graph, state->kb, {});
                     const Resolution r = choose_option(prompt, body.value("choice", std::string{}));
                     const Json event{{"type", "resolution_choice"},
                                      {"conflict_id", cid},
                                      {"label", *r.label},
                                      {"kept", to_json(r).at("kept")},
                                      {"dropped", to_json(r).at("dropped")}};
                     const auto m = store.mutate(id, event, rev);
                     Json out = m.result;
                     out["revision"] = m.state->revision;
                     send(res, out);
                     return;
                 }
                 if (mode != "auto") throw ValidationError("mode must be auto or choice", "bad_field");

                 Provider& provider = need_provider();
                 const auto idx = store.index(id, *embedder_, config_.retrieval.chunk_chars,
                                              config_.retrieval.overlap_chars);
                 auto evidence = retrieve_evidence(*idx, *c, state->graph, state->kb,
                                                   body.value("k", config_.retrieval.k), *embedder_);
                 const auto prompt = build_resolution_prompt(*c, state->graph, state->kb, std::move(evidence));
                 store.set_progress(id, {"resolve", 0, 1});
                 const Resolution r = resolve_conflict(prompt, provider);
                 store.set_progress(id, {});
                 Json proposal = to_json(r);
                 proposal["low_confidence"] = prompt.low_confidence;
                 const auto m = store.mutate(
                     id, Json{{"type", "resolution_proposed"}, {"conflict_id", cid}, {"resolution", proposal}},
                     rev);
                 Json out = m.result;
                 out["resolution"] = proposal;
                 out["prompt"] = to_json(prompt);
                 out["revision"] = m.state->revision;
                 send(res, out);
             }));

    srv.Get(R"(/sessions/([^/]+)/kb)", guarded([&store](const Req& req, Res& res) {
        const auto state = store.get(req.matches[1]);
        Json out = kb_view(state->kb);
        out["revision"] = state->revision;
        send(res, out);
    }));

    srv.Put(R"(/sessions/([^/]+)/kb)", guarded([&store](const Req& req, Res& res) {
        std::string text;
        std::optional<std::uint64_t> rev;
        if (req.get_header_value("Content-Type").starts_with("text/plain")) {
            text = req.body;
            rev = expected_revision(req, Json::object());
        } else {
            const Json body = body_of(req);
            if (!body.contains("kb") || !body["kb"].is_string()) {
                throw ValidationError("field 'kb' is required", "missing_field");
            }
            text = body["kb"].get<std::string>();
            rev = expected_revision(req, body);
        }
        const auto m = store.mutate(req.matches[1], Json{{"type", "kb_replace"}, {"kb_text", text}}, rev);
        Json out = m.result;
        out["kb"] = kb_view(m.state->kb);
        out["revision"] = m.state->revision;
        send(res, out);
    }));

    srv.Get(R"(/sessions/([^/]+)/export)", guarded([&store](const Req& req, Res& res) {
        send(res, to_json(store.get(req.matches[1])->graph));
    }));

    srv.Get(R"(/sessions/([^/]+)/metrics/swi)", guarded([&store](const Req& req, Res& res) {
        const auto state = store.get(req.matches[1]);
        const auto samples = static_cast<int>(query_size(req, "samples", 20));
        const auto seed = query_size(req, "seed", 0);
        send(res, to_json(small_world_index(state->graph, samples, seed)));
    }));
}

} // namespace relgraph
