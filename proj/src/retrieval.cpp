#include "relgraph/retrieval.hpp"

#include "relgraph/error.hpp"
#include "relgraph/resources.hpp"
#include "relgraph/unicode.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace relgraph {

namespace {

constexpr char kMagic[4] = {'R', 'G', 'I', 'X'};
constexpr std::uint32_t kIndexVersion = 1;

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <class T>
T get(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
        throw ParseError("bad_index", 0, "truncated index file");
    }
    return value;
}

std::string canonical(const Graph& g, const std::string& id) {
    const Entity* e = g.find_entity(id);
    return e != nullptr ? e->canonical : id;
}

std::string label_for(std::size_t i) {
    std::string out;
    do {
        out.insert(out.begin(), static_cast<char>('A' + i % 26));
        i = i / 26;
    } while (i-- > 0);
    return out;
}

} // namespace

void normalize(std::vector<double>& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq == 0.0) {
        if (!v.empty()) v[0] = 1.0;
        return;
    }
    const double n = std::sqrt(sq);
    for (double& x : v) x /= n;
}

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

std::vector<std::vector<double>> HashEmbedder::embed(const std::vector<std::string>& texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(dim_, 0.0);
        for (const auto& token : word_tokens(text)) {
            const std::uint64_t h = fnv1a(token);
            v[h % dim_] += (h >> 63) != 0 ? -1.0 : 1.0;
        }
        normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<MentionSpan> chunk_spans(std::size_t length, std::size_t chunk, std::size_t overlap) {
    if (chunk == 0 || overlap >= chunk) {
        throw ValidationError("chunking needs 0 <= overlap < chunk");
    }
    std::vector<MentionSpan> out;
    for (std::size_t start = 0; start < length; start += chunk - overlap) {
        const std::size_t end = std::min(length, start + chunk);
        out.push_back({start, end});
        if (end == length) break;
    }
    return out;
}

EvidenceIndex EvidenceIndex::build(const Document& doc, std::size_t chunk_chars,
                                   std::size_t overlap_chars, Embedder& embedder) {
    const unicode::ScalarIndex scalars(doc.text);
    if (scalars.size() == 0) throw ValidationError("cannot index an empty document");
    std::vector<EvidenceChunk> chunks;
    std::vector<std::string> texts;
    for (const auto& span : chunk_spans(scalars.size(), chunk_chars, overlap_chars)) {
        texts.emplace_back(scalars.slice(span.start, span.end));
        chunks.push_back({doc.id, span, texts.back(), {}});
    }
    auto vectors = embedder.embed(texts);
    if (vectors.size() != chunks.size()) throw ProviderError("embedder returned the wrong count");
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        normalize(vectors[i]);
        chunks[i].vector = std::move(vectors[i]);
    }
    return from_chunks(std::move(chunks));
}

EvidenceIndex EvidenceIndex::from_chunks(std::vector<EvidenceChunk> chunks) {
    EvidenceIndex idx;
    if (!chunks.empty()) idx.dim_ = chunks.front().vector.size();
    for (const auto& c : chunks) {
        if (c.vector.size() != idx.dim_) throw ValidationError("chunk vectors differ in dimension");
    }
    idx.chunks_ = std::move(chunks);
    return idx;
}

std::vector<std::pair<std::size_t, double>> EvidenceIndex::top_k(const std::vector<double>& query,
                                                                 std::size_t k) const {
    if (chunks_.empty()) throw ValidationError("evidence index is empty");
    if (query.size() != dim_) throw ValidationError("query dimension does not match the index");
    std::vector<std::pair<std::size_t, double>> scored;
    scored.reserve(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        double dot = 0.0;
        const auto& v = chunks_[i].vector;
        for (std::size_t d = 0; d < dim_; ++d) dot += v[d] * query[d];
        scored.emplace_back(i, dot);
    }
    const auto better = [this](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return chunks_[a.first].span.start < chunks_[b.first].span.start;
    };
    k = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                      better);
    scored.resize(k);
    return scored;
}

void EvidenceIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write '" + path + "'");
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kIndexVersion);
    put<std::uint64_t>(out, dim_);
    put<std::uint64_t>(out, chunks_.size());
    for (const auto& c : chunks_) {
        put<std::uint64_t>(out, c.span.start);
        put<std::uint64_t>(out, c.span.end);
        out.write(reinterpret_cast<const char*>(c.vector.data()),
                  static_cast<std::streamsize>(c.vector.size() * sizeof(double)));
    }
    if (!out) throw Error("io", "failed writing '" + path + "'");
}

EvidenceIndex EvidenceIndex::load(const std::string& path, const Document& doc) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("cannot open '" + path + "'");
    char magic[4];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
        throw ParseError("bad_index", 0, "not an evidence index file");
    }
    if (get<std::uint32_t>(in) != kIndexVersion) {
        throw ParseError("bad_index", 0, "unsupported index version");
    }
    const auto dim = get<std::uint64_t>(in);
    const auto count = get<std::uint64_t>(in);
    const unicode::ScalarIndex scalars(doc.text);
    std::vector<EvidenceChunk> chunks;
    chunks.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        EvidenceChunk c;
        c.doc_id = doc.id;
        c.span.start = get<std::uint64_t>(in);
        c.span.end = get<std::uint64_t>(in);
        if (c.span.start >= c.span.end || c.span.end > scalars.size()) {
            throw ParseError("bad_index", 0, "index span outside the document");
        }
        c.text = std::string(scalars.slice(c.span.start, c.span.end));
        c.vector.resize(dim);
        if (!in.read(reinterpret_cast<char*>(c.vector.data()),
                     static_cast<std::streamsize>(dim * sizeof(double)))) {
            throw ParseError("bad_index", 0, "truncated index file");
        }
        chunks.push_back(std::move(c));
    }
    return from_chunks(std::move(chunks));
}

std::string render_query(const Conflict& conflict, const Graph& g, const RuleKB& kb) {
    std::string out;
    for (const auto& k : conflict.offenders) {
        if (!out.empty()) out += ' ';
        out += canonical(g, k.src) + ' ' + kb.display(k.rel) + ' ' + canonical(g, k.dst) + '.';
    }
    return out;
}

std::string render_statement(const TripleKey& key, const Graph& g, const RuleKB& kb) {
    return canonical(g, key.src) + " is the " + kb.display(key.rel) + ' ' + canonical(g, key.dst) +
           '.';
}

std::vector<Evidence> retrieve(const EvidenceIndex& idx, const std::string& query, std::size_t k,
                               Embedder& embedder) {
    if (k == 0) throw ValidationError("k must be at least 1");
    auto vectors = embedder.embed({query});
    if (vectors.size() != 1) throw ProviderError("embedder returned the wrong count");
    normalize(vectors[0]);
    std::vector<Evidence> out;
    for (const auto& [i, score] : idx.top_k(vectors[0], k)) {
        out.push_back({idx.chunks()[i].span, idx.chunks()[i].text, score});
    }
    return out;
}

std::vector<Evidence> retrieve_evidence(const EvidenceIndex& idx, const Conflict& conflict,
                                        const Graph& g, const RuleKB& kb, std::size_t k,
                                        Embedder& embedder) {
    return retrieve(idx, render_query(conflict, g, kb), k, embedder);
}

ResolutionPrompt build_resolution_prompt(const Conflict& conflict, const Graph& g,
                                         const RuleKB& kb, std::vector<Evidence> evidence) {
    ResolutionPrompt p;
    p.conflict_id = conflict.id();
    p.evidence = std::move(evidence);
    p.low_confidence = p.evidence.empty();

    const auto& offs = conflict.offenders;
    std::vector<std::string> statements;
    for (const auto& k : offs) statements.push_back(render_statement(k, g, kb));

    std::string rule_text;
    if (conflict.rule.kind == RuleKind::exclusive) {
        rule_text = "at most one \"" + kb.display(conflict.rule.args[0]) +
                    "\" per character";
        p.question = "Based on the evidence, which single statement is correct?";
        for (std::size_t i = 0; i < offs.size(); ++i) {
            std::vector<TripleKey> dropped;
            for (std::size_t j = 0; j < offs.size(); ++j) {
                if (j != i) dropped.push_back(offs[j]);
            }
            p.options.push_back({label_for(i), "Only this is true: " + statements[i], {offs[i]},
                                 std::move(dropped)});
        }
        p.options.push_back({label_for(offs.size()), "None of these statements is true.", {}, offs});
    } else {
        rule_text = conflict.rule.to_line();
        p.question = "Based on the evidence, which option is logically consistent?";
        p.options.push_back({"A", "Only statement 1 is true: " + statements[0], {offs[0]}, {offs[1]}});
        p.options.push_back({"B", "Only statement 2 is true: " + statements[1], {offs[1]}, {offs[0]}});
        p.options.push_back({"C", "Both statements are wrong.", {}, {offs[0], offs[1]}});
    }

    std::string numbered;
    for (std::size_t i = 0; i < statements.size(); ++i) {
        numbered += std::to_string(i + 1) + ". " + statements[i] + '\n';
    }
    std::string evidence_text;
    for (const auto& e : p.evidence) {
        evidence_text += "[" + std::to_string(e.span.start) + "-" + std::to_string(e.span.end) +
                         "] " + e.text + '\n';
    }
    if (evidence_text.empty()) evidence_text = "(no evidence found)\n";
    std::string options;
    for (const auto& o : p.options) options += o.label + ". " + o.statement + '\n';

    p.text = resources::render(resources::resolution_prompt, {{"rule", rule_text},
                                                             {"statements", numbered},
                                                             {"evidence", evidence_text},
                                                             {"question", p.question},
                                                             {"options", options}});
    return p;
}

std::optional<std::string> parse_answer(std::string_view raw,
                                        const std::vector<std::string>& labels) {
    std::size_t i = 0;
    while (i < raw.size()) {
        const auto c = static_cast<unsigned char>(raw[i]);
        if (!std::isalnum(c)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < raw.size() && std::isalnum(static_cast<unsigned char>(raw[j]))) ++j;
        const std::string_view token = raw.substr(i, j - i);
        if (std::ranges::find(labels, token) != labels.end()) return std::string(token);
        i = j;
    }
    return std::nullopt;
}

Resolution choose_option(const ResolutionPrompt& prompt, std::string_view label) {
    for (const auto& o : prompt.options) {
        if (o.label == label) return {prompt.conflict_id, o.label, o.kept, o.dropped, "", ""};
    }
    throw ValidationError("no option '" + std::string(label) + "'", "bad_choice");
}

Resolution resolve_conflict(const ResolutionPrompt& prompt, Provider& provider,
                            double temperature) {
    Resolution r;
    r.conflict_id = prompt.conflict_id;
    try {
        r.raw = provider.complete(prompt.text, temperature);
    } catch (const ProviderError& e) {
        r.error = e.what();
        return r;
    }
    std::vector<std::string> labels;
    for (const auto& o : prompt.options) labels.push_back(o.label);
    if (const auto label = parse_answer(r.raw, labels)) {
        Resolution chosen = choose_option(prompt, *label);
        chosen.raw = std::move(r.raw);
        return chosen;
    }
    r.error = "unparseable answer";
    return r;
}

void apply_resolution(Graph& g, const RuleKB& kb, const Resolution& r) {
    if (!r.label) throw ValidationError("resolution has no chosen option", "unresolved");
    for (const auto& k : r.dropped) {
        if (!g.triples.contains(k)) throw NotFound("unknown triple " + k.str());
    }
    for (const auto& k : r.kept) {
        if (!g.triples.contains(k)) throw NotFound("unknown triple " + k.str());
    }
    for (const auto& k : r.kept) set_status(g, k, TripleStatus::confirmed);
    for (const auto& k : r.dropped) set_status(g, k, TripleStatus::rejected);
    retract_unsupported(g, kb);
}

Json to_json(const Evidence& e) {
    return Json{{"span", Json::array({e.span.start, e.span.end})},
                {"text", e.text},
                {"score", e.score}};
}

Json to_json(const ResolutionPrompt& p) {
    Json options = Json::array();
    for (const auto& o : p.options) {
        Json kept = Json::array(), dropped = Json::array();
        for (const auto& k : o.kept) kept.push_back(to_json(k));
        for (const auto& k : o.dropped) dropped.push_back(to_json(k));
        options.push_back(Json{{"label", o.label},
                               {"statement", o.statement},
                               {"kept", kept},
                               {"dropped", dropped}});
    }
    Json evidence = Json::array();
    for (const auto& e : p.evidence) evidence.push_back(to_json(e));
    return Json{{"conflict_id", p.conflict_id},
                {"question", p.question},
                {"options", options},
                {"evidence", evidence},
                {"low_confidence", p.low_confidence},
                {"text", p.text}};
}

Json to_json(const Resolution& r) {
    Json kept = Json::array(), dropped = Json::array();
    for (const auto& k : r.kept) kept.push_back(to_json(k));
    for (const auto& k : r.dropped) dropped.push_back(to_json(k));
    Json j{{"conflict_id", r.conflict_id},
           {"label", r.label ? Json(*r.label) : Json(nullptr)},
           {"kept", kept},
           {"dropped", dropped},
           {"raw", r.raw}};
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

} // namespace relgraph
