#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsfl/embedding_store.hpp"
#include "nsfl/logic_formula.hpp"
#include "nsfl/operators.hpp"
#include "nsfl/sqo.hpp"

namespace nsfl {

enum class Method { BASELINE, NSFL, GEOMETRIC };
enum class Stage { RERANK_ONLY, OPT_ONLY, HYBRID };

const char* to_string(Method m);
const char* to_string(Stage s);
Method method_from_string(const std::string& s);
Stage stage_from_string(const std::string& s);

/// Candidate retrieval boundary. Implementations return the top-k row
/// indices by cosine, scores attached, honoring the tie rule (score
/// descending, then id ascending). Approximate backends may miss items;
/// the built-in exact scan is the reference.
class AnnBackend {
public:
    virtual ~AnnBackend() = default;
    virtual std::vector<std::pair<std::size_t, double>> top_k(
        const EmbeddingMatrix& store, std::span<const double> query,
        std::size_t k) = 0;
    virtual const char* name() const = 0;
};

/// Full scan over the corpus; exact by construction.
class ExactScanBackend final : public AnnBackend {
public:
    std::vector<std::pair<std::size_t, double>> top_k(
        const EmbeddingMatrix& store, std::span<const double> query,
        std::size_t k) override;
    const char* name() const override { return "exact"; }
};

struct PipelineConfig {
    Method method = Method::BASELINE;
    Stage stage = Stage::RERANK_ONLY;
    std::size_t oversample_k = 1000;  // candidate pool size K
    std::size_t final_k = 100;        // returned ranking length k
    OperatorConfig operator_config;
    SqoConfig sqo_config;
    // Map similarities through (s + 1) / 2 everywhere: entry scores,
    // operator inputs, branch triggers, pool maxima.
    bool rescale_scores = false;
    // OR templates: score against the monolithic vector verbatim instead
    // of the summed atoms (geometric method only).
    bool geometric_or_passthrough = false;
    // Start SQO at the monolithic vector instead of a random point.
    bool warm_start_monolithic = false;
    // Non-null swaps in an approximate retrieval backend.
    AnnBackend* ann = nullptr;
};

/// Throws ConfigError unless 1 <= final_k <= oversample_k and the nested
/// configs validate.
void validate(const PipelineConfig& cfg);

struct ResultEntry {
    std::string id;
    double score = 0.0;
};

struct Provenance {
    std::size_t pool_size = 0;
    // Set only when operator rescoring ran; stable + corrected == pool_size.
    std::optional<std::size_t> stable_hits;
    std::optional<std::size_t> corrected_hits;
    std::optional<std::size_t> gate_clamp_hits;
    bool rescaled = false;
    bool pool_clamped = false;  // oversample_k exceeded the corpus size
    std::optional<int> sqo_steps;
    std::optional<std::string> sqo_stop_reason;
    std::optional<double> sqo_objective;
    std::vector<std::string> notes;
};

struct RankedResult {
    std::string qid;
    Method method = Method::BASELINE;
    Stage stage = Stage::RERANK_ONLY;
    QueryKind kind = QueryKind::AND2;
    FusionStyle fusion_style = FusionStyle::SIMPLE;
    // Sorted by score descending, ties by id ascending; length <= final_k.
    std::vector<ResultEntry> entries;
    Provenance provenance;
};

/// Exact (or plugin) top-k by cosine. k larger than the corpus is clamped,
/// reported through *clamped. Throws EmptyCorpusError / DimensionError.
std::vector<std::pair<std::size_t, double>> retrieve_candidates(
    std::span<const double> query, const EmbeddingMatrix& store, std::size_t k,
    AnnBackend* ann = nullptr, bool* clamped = nullptr);

/// Executes one query through the configured method and stage:
///   BASELINE            rank the top final_k by cosine to the monolithic
///                       vector.
///   NSFL rerank         pool = top oversample_k by monolithic cosine;
///                       rescore the pool with the formula operator (pool
///                       maxima feed the smoothing gates); keep final_k.
///   NSFL opt            rank by cosine to the optimized query vector.
///   NSFL hybrid         pool by the optimized vector, then rescore as in
///                       rerank.
///   GEOMETRIC stages    same shapes, with the arithmetic query vector in
///                       place of the optimized one and plain cosine to it
///                       as the rescoring function.
RankedResult run_query(const QueryPack& pack, const EmbeddingMatrix& store,
                       const PipelineConfig& cfg);

std::string to_json(const RankedResult& r);
RankedResult ranked_result_from_json(const std::string& line,
                                     std::size_t lineno = 0);
std::vector<RankedResult> load_ranked_results(const std::string& path);

} // namespace nsfl
