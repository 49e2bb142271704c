// Thin string-in/string-out layer; the package __init__ turns the JSON into
// Python objects.

#include "relgraph/engine.hpp"
#include "relgraph/error.hpp"
#include "relgraph/extract.hpp"
#include "relgraph/metrics.hpp"
#include "relgraph/retrieval.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace relgraph;

namespace {

RuleKB kb_of(const std::optional<std::string>& text) {
    return text ? load_kb(*text) : builtin_kb();
}

Graph graph_of(const std::string& text, const RuleKB* kb = nullptr) {
    return graph_from_json(Json::parse(text), kb);
}

std::set<TripleKey> key_set(const std::vector<std::vector<std::string>>& keys) {
    std::set<TripleKey> out;
    for (const auto& k : keys) {
        if (k.size() != 3) throw ValidationError("triple keys are [src, rel, dst]");
        out.insert({k[0], k[1], k[2]});
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "relgraph native core";

    static py::exception<Error> error_type(m, "RelgraphError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error_type, (e.code() + ": " + e.what()).c_str());
        } catch (const nlohmann::json::exception& e) {
            py::set_error(PyExc_ValueError, e.what());
        }
    });

    m.def("builtin_kb_text", [] { return std::string(builtin_kb_text()); });

    m.def("validate_kb", [](const std::string& text) {
        const RuleKB kb = load_kb(text);
        Json diags = Json::array();
        for (const auto& d : validate_kb(kb)) {
            Json rules = Json::array();
            for (const auto& r : d.rules) rules.push_back(r.to_line());
            diags.push_back(Json{{"severity", d.severity == Severity::error ? "error" : "warning"},
                                 {"message", d.message},
                                 {"rules", rules}});
        }
        return Json{{"relations", kb.relations().size()},
                    {"rules", kb.rules().size()},
                    {"text", save_kb(kb)},
                    {"diagnostics", diags}}
            .dump();
    });

    m.def("close", [](const std::string& graph, const std::optional<std::string>& kb_text) {
        const RuleKB kb = kb_of(kb_text);
        const CloseResult r = close(graph_of(graph, &kb), kb);
        Json derivations = Json::array();
        for (const auto& d : r.derivations) derivations.push_back(to_json(d));
        return Json{{"graph", to_json(r.graph)},
                    {"derivations", derivations},
                    {"max_depth", r.max_depth},
                    {"depth_cap_hit", r.depth_cap_hit}}
            .dump();
    }, py::arg("graph"), py::arg("kb") = py::none());

    m.def("detect_conflicts", [](const std::string& graph, const std::optional<std::string>& kb_text) {
        const RuleKB kb = kb_of(kb_text);
        Json out = Json::array();
        for (const auto& c : detect_conflicts(graph_of(graph, &kb), kb)) out.push_back(to_json(c));
        return out.dump();
    }, py::arg("graph"), py::arg("kb") = py::none());

    m.def("plan_completion", [](const std::string& from, const std::string& to,
                                const std::optional<std::string>& kb_text) {
        const RuleKB kb = kb_of(kb_text);
        return to_json(plan_completion(graph_of(from, &kb), graph_of(to, &kb), kb)).dump();
    }, py::arg("start"), py::arg("target"), py::arg("kb") = py::none());

    m.def("apply_ops", [](const std::string& graph, const std::string& ops,
                          const std::optional<std::string>& kb_text) {
        const RuleKB kb = kb_of(kb_text);
        const CompletionPlan plan = completion_plan_from_json(Json::parse(ops));
        const ApplyResult r = apply_ops(graph_of(graph, &kb), plan.ops, kb);
        Json out{{"graph", to_json(r.graph)}, {"applied", r.applied}, {"error", nullptr}};
        if (r.error) out["error"] = Json{{"index", r.error->index}, {"message", r.error->message}};
        return out.dump();
    }, py::arg("graph"), py::arg("ops"), py::arg("kb") = py::none());

    m.def("score_triples", [](const std::vector<std::vector<std::string>>& pred,
                              const std::vector<std::vector<std::string>>& gold,
                              const std::optional<std::string>& soft_kb) {
        const std::optional<RuleKB> kb = soft_kb ? std::optional(load_kb(*soft_kb)) : std::nullopt;
        return to_json(score_triples(key_set(pred), key_set(gold), kb ? &*kb : nullptr)).dump();
    }, py::arg("pred"), py::arg("gold"), py::arg("soft_kb") = py::none());

    m.def("score_entities", [](const std::vector<std::set<std::string>>& pred,
                               const std::vector<std::set<std::string>>& gold) {
        return to_json(score_entities(pred, gold)).dump();
    });

    m.def("small_world_index", [](const std::string& graph, int samples, std::uint64_t seed) {
        return to_json(small_world_index(graph_of(graph), samples, seed)).dump();
    }, py::arg("graph"), py::arg("samples") = 20, py::arg("seed") = 0);

    m.def("consensus", [](const std::vector<std::set<std::string>>& runs, int tau) {
        return consensus(runs, tau);
    });

    m.def("chunk_spans", [](std::size_t length, std::size_t chunk, std::size_t overlap) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& s : chunk_spans(length, chunk, overlap)) out.emplace_back(s.start, s.end);
        return out;
    });
}
