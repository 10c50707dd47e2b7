#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "nsfl/embedding_store.hpp"
#include "nsfl/logic_formula.hpp"
#include "nsfl/pipeline.hpp"

namespace nsfl {

/// qid -> relevant ids. Queries judged with an empty set are skipped by the
/// metric aggregations (AP itself refuses an empty set).
using JudgmentMap = std::map<std::string, std::unordered_set<std::string>>;

/// Reads newline-delimited {"qid", "relevant_ids": [...]} objects.
JudgmentMap load_judgments(const std::string& path);

/// Collects the relevant_ids carried inline in the packs.
JudgmentMap judgments_from_packs(std::span<const QueryPack> packs);

/// Derives judgments from corpus labels: an item is relevant when its label
/// set satisfies the pack's formula over pack.atoms (conjunction = all
/// positive atoms present, negated atom absent, disjunction = any present).
JudgmentMap judgments_from_labels(const EmbeddingMatrix& store,
                                  std::span<const QueryPack> packs);

/// AP@cutoff = (sum of precision@r at each relevant rank r <= cutoff)
///             / min(|relevant|, cutoff).
/// Throws UndefinedMetricError when relevant is empty.
double average_precision(std::span<const std::string> ranking,
                         const std::unordered_set<std::string>& relevant,
                         std::size_t cutoff);

/// |top-K intersect relevant| / |relevant|.
double recall_at_k(std::span<const std::string> ranking,
                   const std::unordered_set<std::string>& relevant,
                   std::size_t k);

struct SignificanceResult {
    double statistic = 0.0;  // min(W+, W-)
    double p_value = 1.0;
    std::size_t n_effective = 0;
    double mean_delta = 0.0;
    std::pair<double, double> ci_95{0.0, 0.0};
};

struct WilcoxonOptions {
    std::uint64_t seed = 42;
    int bootstrap_resamples = 10000;
};

/// Two-sided paired signed-rank test on a vs b. Zero differences are
/// dropped; tied magnitudes share average ranks. n_effective <= 25 uses the
/// exact permutation distribution, larger n the normal approximation with
/// continuity correction and tie-corrected variance. The CI is a seeded
/// percentile bootstrap over the mean difference (zeros included).
/// Throws InsufficientDataError when fewer than 5 non-zero differences
/// remain.
SignificanceResult wilcoxon_signed_rank(std::span<const double> a,
                                        std::span<const double> b,
                                        const WilcoxonOptions& opt = {});

struct EvalOptions {
    std::size_t cutoff = 100;           // AP cutoff (the final-k)
    std::vector<std::size_t> recall_ks = {20, 100};
    // Report each (method, stage, template) cell as the better of the two
    // fusion styles instead of pooling all queries.
    bool best_of_fusion = false;
};

/// Metrics for one (method, stage, template) group of results.
struct EvalReport {
    Method method = Method::BASELINE;
    Stage stage = Stage::RERANK_ONLY;
    QueryKind kind = QueryKind::AND2;
    // Set when best_of_fusion picked this style for the cell.
    std::optional<FusionStyle> fusion_style;
    std::size_t cutoff = 100;  // AP cutoff these numbers were computed at
    std::map<std::string, double> per_query_ap;
    double map_at_k = 0.0;
    std::map<std::size_t, double> recall_at;
    std::vector<std::string> skipped_qids;  // judged empty, excluded
};

/// Groups results and computes AP/mAP/recall per group.
/// Throws MissingJudgmentError when a result's qid has no judgment line.
std::vector<EvalReport> evaluate_results(std::span<const RankedResult> results,
                                         const JudgmentMap& judgments,
                                         const EvalOptions& opt = {});

/// One mAP cell of the ablation matrix; absent when no results exist for
/// the row's configuration and template.
struct AblationRow {
    Method method = Method::BASELINE;
    std::optional<Stage> stage;  // unset for the baseline row
    std::array<std::optional<double>, 6> cells;  // template order below
    std::optional<double> avg;   // mean over present cells
};

/// Template column order used by the ablation matrix.
extern const std::array<QueryKind, 6> kAblationTemplates;

struct AblationMatrix {
    // Fixed row order: baseline, then nsfl and geometric each through
    // rerank / opt / hybrid.
    std::vector<AblationRow> rows;
};

AblationMatrix ablation_report(std::span<const RankedResult> results,
                               const JudgmentMap& judgments,
                               const EvalOptions& opt = {});

std::string to_csv(const AblationMatrix& m);
std::string to_json(const AblationMatrix& m);

/// Long-form metrics: one row per (method, stage, template, metric).
std::string metrics_csv(std::span<const EvalReport> reports);
std::string metrics_json(std::span<const EvalReport> reports);

/// Per-template bar-chart series (template, method, stage, map value).
std::string plot_data_csv(std::span<const EvalReport> reports);

struct SignificanceRow {
    Method method = Method::NSFL;
    Stage stage = Stage::RERANK_ONLY;
    QueryKind kind = QueryKind::AND2;
    SignificanceResult result;
};

/// Pairs every non-baseline group's per-query APs against the baseline
/// group of the same template and runs the signed-rank test. Groups with
/// too few usable pairs are reported through `warnings` and skipped.
std::vector<SignificanceRow> significance_vs_baseline(
    std::span<const RankedResult> results, const JudgmentMap& judgments,
    const EvalOptions& opt, const WilcoxonOptions& wopt,
    std::vector<std::string>* warnings = nullptr);

std::string significance_csv(std::span<const SignificanceRow> rows);

} // namespace nsfl
