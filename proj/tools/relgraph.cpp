#include "relgraph/config.hpp"
#include "relgraph/engine.hpp"
#include "relgraph/error.hpp"
#include "relgraph/extract.hpp"
#include "relgraph/metrics.hpp"
#include "relgraph/retrieval.hpp"
#include "relgraph/service.hpp"
#include "relgraph/unicode.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>

using namespace relgraph;

namespace {

struct Exit {
    int code;
};

RuleKB kb_from(const std::string& path) {
    if (path.empty()) return builtin_kb();
    return load_kb(read_text_file(path));
}

void require_valid(const RuleKB& kb) {
    const auto diags = validate_kb(kb);
    for (const auto& d : diags) {
        if (d.severity == Severity::error) throw ValidationError(d.message, "kb_invalid");
    }
}

Json provider_config(const std::string& path, const AppConfig& app) {
    if (path.empty()) return app.provider;
    const Json j = read_json_file(path);
    if (j.contains("kind")) return j;
    return j.value("provider", Json::object());
}

std::set<TripleKey> live_keys(const Graph& g) {
    std::set<TripleKey> out;
    for (const auto& [k, t] : g.triples) {
        if (t.status != TripleStatus::rejected) out.insert(k);
    }
    return out;
}

Json diagnostics_json(const std::vector<Diagnostic>& diags) {
    Json out = Json::array();
    for (const auto& d : diags) {
        Json rules = Json::array();
        for (const auto& r : d.rules) rules.push_back(r.to_line());
        out.push_back(Json{{"severity", d.severity == Severity::error ? "error" : "warning"},
                           {"message", d.message},
                           {"rules", rules}});
    }
    return out;
}

// Resolves open conflicts one at a time until none is left or the provider
// gives no usable answer for the remaining ones.
Json auto_resolve(Graph& g, const RuleKB& kb, const Document& doc, Provider& provider,
                  Embedder& embedder, const RetrievalConfig& rc) {
    const EvidenceIndex idx = EvidenceIndex::build(doc, rc.chunk_chars, rc.overlap_chars, embedder);
    Json log = Json::array();
    std::set<std::string> tried;
    while (true) {
        const auto conflicts = detect_conflicts(g, kb);
        const auto next = std::ranges::find_if(
            conflicts, [&](const Conflict& c) { return !tried.contains(c.id()); });
        if (next == conflicts.end()) break;
        tried.insert(next->id());
        auto evidence = retrieve_evidence(idx, *next, g, kb, rc.k, embedder);
        const auto prompt = build_resolution_prompt(*next, g, kb, std::move(evidence));
        const Resolution r = resolve_conflict(prompt, provider);
        log.push_back(to_json(r));
        if (!r.label) continue;
        apply_resolution(g, kb, r);
        g = close(g, kb).graph;
    }
    return log;
}

Json annotate_conflicts(Graph& g, const RuleKB& kb) {
    const auto conflicts = detect_conflicts(g, kb);
    Json out = Json::array();
    for (const auto& c : conflicts) {
        for (const auto& k : c.offenders) g.triples.at(k).status = TripleStatus::conflicted;
        out.push_back(to_json(c));
    }
    return out;
}

void emit(const Json& j) { std::cout << j.dump(2) << '\n'; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"relgraph: character relation graphs with rule-based completion"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file shared with the service");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "extract, reason and export one document");
    std::string doc_path, kb_path, out_path, title;
    bool auto_res = false;
    pipeline->add_option("doc", doc_path, "document text file")->required();
    pipeline->add_option("--kb", kb_path, "rule KB file (default: built-in starter KB)");
    pipeline->add_option("--out", out_path, "output graph JSON")->required();
    pipeline->add_option("--title", title, "document title");
    pipeline->add_flag("--auto-resolve", auto_res, "resolve conflicts with the provider and apply");

    // eval
    auto* eval = app.add_subcommand("eval", "score a predicted graph against a gold graph");
    std::string pred_path, gold_path;
    bool soft = false;
    eval->add_option("--pred", pred_path)->required();
    eval->add_option("--gold", gold_path)->required();
    eval->add_option("--kb", kb_path, "KB for --soft-hierarchy");
    eval->add_flag("--soft-hierarchy", soft, "a predicted subtype may match a gold supertype");

    // logic-bench
    auto* bench = app.add_subcommand("logic-bench", "run the add/remove logic benchmark");
    std::string items_path, provider_path;
    bench->add_option("items", items_path, "JSON lines {task, inputs, gold}")->required();
    bench->add_option("--provider", provider_path, "provider config JSON");

    // swi
    auto* swi = app.add_subcommand("swi", "small-world statistics of a graph");
    std::string graph_path;
    int samples = 20;
    std::uint64_t seed = 0;
    swi->add_option("graph", graph_path)->required();
    swi->add_option("--samples", samples)->check(CLI::PositiveNumber);
    swi->add_option("--seed", seed);

    // kb
    auto* kb_cmd = app.add_subcommand("kb", "knowledge base tools");
    kb_cmd->require_subcommand(1);
    auto* kb_validate = kb_cmd->add_subcommand("validate", "check a KB for contradictions");
    std::string validate_path;
    kb_validate->add_option("kb", validate_path)->required();

    // plan / apply / close
    auto* plan = app.add_subcommand("plan", "completion operations turning one graph into another");
    std::string from_path, to_path;
    plan->add_option("--from", from_path)->required();
    plan->add_option("--to", to_path)->required();
    plan->add_option("--kb", kb_path);

    auto* apply = app.add_subcommand("apply", "replay completion operations on a graph");
    std::string ops_path;
    apply->add_option("--graph", graph_path)->required();
    apply->add_option("--ops", ops_path)->required();
    apply->add_option("--kb", kb_path);
    apply->add_option("--out", out_path);

    auto* close_cmd = app.add_subcommand("close", "close a graph under the KB and list conflicts");
    close_cmd->add_option("graph", graph_path)->required();
    close_cmd->add_option("--kb", kb_path);
    close_cmd->add_option("--out", out_path);

    // serve
    auto* serve = app.add_subcommand("serve", "run the HTTP service");
    int port = -1;
    std::string data_dir, host;
    serve->add_option("--port", port);
    serve->add_option("--host", host);
    serve->add_option("--data-dir", data_dir);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << Json{{"error", {{"code", "usage"}, {"message", e.what()}}}}.dump() << '\n';
        return 2;
    }

    try {
        AppConfig cfg = load_config(config_path);

        if (*pipeline) {
            const RuleKB kb = kb_path.empty() && !cfg.kb_path.empty() ? kb_from(cfg.kb_path) : kb_from(kb_path);
            require_valid(kb);
            const Document doc{std::filesystem::path(doc_path).stem().string(),
                               unicode::nfc(read_text_file(doc_path)), title};
            auto provider = make_provider(cfg.provider);
            auto embedder = make_embedder(cfg.embedder);

            Graph g;
            g.doc_id = doc.id;
            g.kb_version = kb.version();
            const auto chars = extract_characters(doc, cfg.extraction, *provider);
            ingest_candidates(g, kb, chars.candidates, {});
            // batch mode stands in for the annotator: every retained character is accepted
            std::vector<Entity> entities;
            for (auto& [_, e] : g.entities) {
                e.status = EntityStatus::confirmed;
                entities.push_back(e);
            }
            RelationExtraction rels;
            if (!entities.empty()) {
                rels = extract_relations(doc, entities, kb, cfg.extraction, *provider);
                ingest_candidates(g, kb, {}, rels.candidates);
            }
            g = close(g, kb).graph;
            Json resolutions = Json::array();
            if (auto_res) resolutions = auto_resolve(g, kb, doc, *provider, *embedder, cfg.retrieval);
            const Json conflicts = annotate_conflicts(g, kb);

            Json doc_json = to_json(g);
            doc_json["conflicts"] = conflicts;
            save_graph_file(out_path, doc_json);

            Json rejects = Json::array();
            for (const auto& r : chars.rejects) rejects.push_back(to_json(r));
            for (const auto& r : rels.rejects) rejects.push_back(to_json(r));
            emit(Json{{"out", out_path},
                      {"entities", g.entities.size()},
                      {"triples", g.triples.size()},
                      {"character_candidates", chars.candidates.size()},
                      {"relation_candidates", rels.candidates.size()},
                      {"open_conflicts", conflicts.size()},
                      {"resolutions", resolutions},
                      {"rejects", rejects}});
        } else if (*eval) {
            const Graph pred = load_graph_file(pred_path);
            const Graph gold = load_graph_file(gold_path);
            const RuleKB kb = kb_from(kb_path);
            const auto triples = score_triples(live_keys(pred), live_keys(gold), soft ? &kb : nullptr);
            const auto entities = score_entities(alias_groups(pred), alias_groups(gold));
            emit(Json{{"triples", to_json(triples)},
                      {"entities", to_json(entities)},
                      {"soft_hierarchy", soft}});
        } else if (*bench) {
            const auto items = load_logic_bench(read_text_file(items_path));
            auto provider = make_provider(provider_config(provider_path, cfg));
            emit(to_json(run_logic_benchmark(items, *provider)));
        } else if (*swi) {
            emit(to_json(small_world_index(load_graph_file(graph_path), samples, seed)));
        } else if (*kb_cmd) {
            const RuleKB kb = load_kb(read_text_file(validate_path));
            const auto diags = validate_kb(kb);
            const bool ok = !has_hard_errors(diags);
            emit(Json{{"valid", ok},
                      {"relations", kb.relations().size()},
                      {"rules", kb.rules().size()},
                      {"diagnostics", diagnostics_json(diags)}});
            if (!ok) throw Exit{1};
        } else if (*plan) {
            const RuleKB kb = kb_from(kb_path);
            const Graph from = load_graph_file(from_path, &kb);
            const Graph to = load_graph_file(to_path, &kb);
            emit(to_json(plan_completion(from, to, kb)));
        } else if (*apply) {
            const RuleKB kb = kb_from(kb_path);
            const Graph g = load_graph_file(graph_path, &kb);
            const CompletionPlan p = completion_plan_from_json(read_json_file(ops_path));
            const ApplyResult r = apply_ops(g, p.ops, kb);
            if (!out_path.empty()) save_graph_file(out_path, to_json(r.graph));
            Json out{{"applied", r.applied}, {"ops", p.ops.size()}};
            if (r.error) out["error"] = Json{{"index", r.error->index}, {"message", r.error->message}};
            if (out_path.empty()) out["graph"] = to_json(r.graph);
            emit(out);
            if (r.error) throw Exit{1};
        } else if (*close_cmd) {
            const RuleKB kb = kb_from(kb_path);
            const CloseResult r = close(load_graph_file(graph_path, &kb), kb);
            Json derivations = Json::array();
            for (const auto& d : r.derivations) derivations.push_back(to_json(d));
            Json conflicts = Json::array();
            for (const auto& c : detect_conflicts(r.graph, kb)) conflicts.push_back(to_json(c));
            if (!out_path.empty()) save_graph_file(out_path, to_json(r.graph));
            Json out{{"added", r.derivations.size()},
                     {"max_depth", r.max_depth},
                     {"depth_cap_hit", r.depth_cap_hit},
                     {"derivations", derivations},
                     {"conflicts", conflicts}};
            if (out_path.empty()) out["graph"] = to_json(r.graph);
            emit(out);
        } else if (*serve) {
            if (port >= 0) cfg.port = port;
            if (!host.empty()) cfg.host = host;
            if (!data_dir.empty()) cfg.data_dir = data_dir;
            std::shared_ptr<Provider> provider;
            try {
                provider = make_provider(cfg.provider);
            } catch (const ValidationError& e) {
                if (e.code() != "no_provider") throw;
                std::cerr << Json{{"warn", "no provider configured; extraction disabled"}}.dump() << '\n';
            }
            Service service(cfg, provider, make_embedder(cfg.embedder));
            const int bound = service.bind();
            std::cerr << Json{{"listening", cfg.host + ":" + std::to_string(bound)},
                              {"data_dir", cfg.data_dir}}.dump()
                      << '\n';
            service.run();
        }
    } catch (const Exit& e) {
        return e.code;
    } catch (const Error& e) {
        std::cerr << Json{{"error", {{"code", e.code()}, {"message", e.what()}}}}.dump() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << Json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << '\n';
        return 3;
    }
    return 0;
}
