#pragma once

#include "relgraph/engine.hpp"
#include "relgraph/graph.hpp"
#include "relgraph/kb.hpp"
#include "relgraph/provider.hpp"

#include <atomic>
#include <optional>
#include <string>
#include <vector>

namespace relgraph {

/// Scales `v` to unit length; the zero vector becomes e0.
void normalize(std::vector<double>& v);

class Embedder {
public:
    virtual ~Embedder() = default;
    /// One unit vector per input text. Throws ProviderError on failure.
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
    virtual std::size_t dim() const = 0;
    virtual std::string name() const = 0;
};

/// Signed feature hashing of lowercase word tokens. Deterministic and
/// offline; texts sharing words land close together.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 256);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    std::size_t dim() const override { return dim_; }
    std::string name() const override { return "hash"; }

private:
    std::size_t dim_;
};

/// OpenAI-style POST <base_url>/embeddings. A `dim` of 0 is learned from the
/// first response.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(HttpEndpoint endpoint, std::size_t dim = 0);
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;
    std::size_t dim() const override { return dim_; }
    std::string name() const override { return "http:" + endpoint_.model; }

private:
    HttpEndpoint endpoint_;
    std::atomic<std::size_t> dim_;
};

/// Chunk spans over a text of `length` scalars: windows of `chunk` with
/// consecutive windows sharing `overlap`; the last one may be short.
std::vector<MentionSpan> chunk_spans(std::size_t length, std::size_t chunk, std::size_t overlap);

struct EvidenceChunk {
    std::string doc_id;
    MentionSpan span;
    std::string text;
    std::vector<double> vector;
};

struct Evidence {
    MentionSpan span;
    std::string text;
    double score = 0.0;
};

/// Exact inner-product index over the chunks of one document. Immutable
/// once built.
class EvidenceIndex {
public:
    static EvidenceIndex build(const Document& doc, std::size_t chunk_chars,
                               std::size_t overlap_chars, Embedder& embedder);

    const std::vector<EvidenceChunk>& chunks() const noexcept { return chunks_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return chunks_.empty(); }

    /// (chunk index, score) of the k best chunks, score descending, ties by
    /// earlier span start.
    std::vector<std::pair<std::size_t, double>> top_k(const std::vector<double>& query,
                                                      std::size_t k) const;

    /// Binary sidecar: "RGIX", version, dim, count, then (start, end, vector)
    /// rows. Texts are not stored; `load` re-slices them from the document.
    void save(const std::string& path) const;
    static EvidenceIndex load(const std::string& path, const Document& doc);

    /// Wraps precomputed chunks; vectors must share one dimension.
    static EvidenceIndex from_chunks(std::vector<EvidenceChunk> chunks);

private:
    std::vector<EvidenceChunk> chunks_;
    std::size_t dim_ = 0;
};

/// "<src> <relation display> <dst>." for each offender, space-joined.
std::string render_query(const Conflict& conflict, const Graph& g, const RuleKB& kb);

/// "<src> is the <relation display> <dst>."
std::string render_statement(const TripleKey& key, const Graph& g, const RuleKB& kb);

std::vector<Evidence> retrieve(const EvidenceIndex& idx, const std::string& query, std::size_t k,
                               Embedder& embedder);
std::vector<Evidence> retrieve_evidence(const EvidenceIndex& idx, const Conflict& conflict,
                                        const Graph& g, const RuleKB& kb, std::size_t k,
                                        Embedder& embedder);

struct PromptOption {
    std::string label;
    std::string statement;
    std::vector<TripleKey> kept;
    std::vector<TripleKey> dropped;
};

struct ResolutionPrompt {
    std::string conflict_id;
    std::string question;
    std::vector<PromptOption> options;
    std::vector<Evidence> evidence;
    bool low_confidence = false;  // no evidence was found
    std::string text;             // the full prompt sent to the provider
};

/// Two-offender conflicts get A (keep the first), B (keep the second) and
/// C (both wrong); exclusive conflicts get one option per offender plus a
/// final "none of them".
ResolutionPrompt build_resolution_prompt(const Conflict& conflict, const Graph& g,
                                         const RuleKB& kb, std::vector<Evidence> evidence);

/// First standalone uppercase token equal to one of `labels`.
std::optional<std::string> parse_answer(std::string_view raw,
                                        const std::vector<std::string>& labels);

struct Resolution {
    std::string conflict_id;
    std::optional<std::string> label;  // unset: unparseable or provider failure
    std::vector<TripleKey> kept;
    std::vector<TripleKey> dropped;
    std::string raw;
    std::string error;
};

/// Asks the provider. Never throws for provider failures; the resolution
/// then has no label and the conflict stays open.
Resolution resolve_conflict(const ResolutionPrompt& prompt, Provider& provider,
                            double temperature = 0.0);

/// Resolution for an explicit option label. Throws ValidationError for an
/// unknown label.
Resolution choose_option(const ResolutionPrompt& prompt, std::string_view label);

/// Kept triples become confirmed, dropped ones rejected; inferences that
/// relied on dropped triples are retracted.
void apply_resolution(Graph& g, const RuleKB& kb, const Resolution& r);

Json to_json(const Evidence& e);
Json to_json(const ResolutionPrompt& p);
Json to_json(const Resolution& r);

} // namespace relgraph
