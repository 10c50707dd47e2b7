#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsfl/logic_formula.hpp"

namespace nsfl {

enum class DeltaDirection { REINFORCEMENT, DEPARTURE };

/// Signed marginal contribution of an atom: how much the fused phrase's
/// similarity moved relative to the remaining context alone.
struct NSDelta {
    double value = 0.0;
    DeltaDirection direction = DeltaDirection::REINFORCEMENT;
};

/// value = s_fused - s_context; REINFORCEMENT iff value >= 0.
NSDelta delta(double s_fused, double s_context);

struct AtomScore {
    std::string atom;
    double score = 0.0;
};

/// Returns the atom holding the j-th smallest score (j is 1-based).
/// Equal scores are ordered by atom label so rankings stay reproducible.
/// Throws RankOutOfRangeError unless 1 <= j <= scores.size().
const std::string& minchoice(std::span<const AtomScore> scores, int j);

struct OperatorConfig {
    // Weight of the correction term on non-stable branches. 1.0 reproduces
    // the plain two-sided forms; 0.0 degenerates to the fused score.
    double coefficient_c = 1.0;
    // Additive guard in the smoothing denominator s_max + epsilon.
    double epsilon = 1e-8;
    // NOT scoring: confidence-gated subtraction vs. the raw two-sided form.
    bool use_smoothed_not = true;
    // Keep the fused score untouched when the branch trigger fires.
    bool use_stability = true;

    enum class MaxMode { POOL_MAX, CORPUS_MAX };
    // Where the gate denominator s_max comes from: the current candidate
    // pool, or a caller-supplied corpus-level bound.
    MaxMode s_b_max_mode = MaxMode::POOL_MAX;
};

/// Throws ConfigError when coefficient_c is outside [0, 2] or epsilon <= 0.
void validate(const OperatorConfig& cfg);

/// Cosine similarities of one candidate item against the query components.
/// s_c and s_abc are present exactly when the formula kind needs them.
struct ScoreBundle {
    double s_a = 0.0;
    double s_b = 0.0;
    std::optional<double> s_c;
    double s_ab = 0.0;
    std::optional<double> s_abc;
    double s_m = 0.0;
};

enum class StabilityBranch { STABLE, CORRECTED };

struct OperatorResult {
    double score = 0.0;
    // STABLE when the branch trigger fired and the fused score was kept
    // (for OR: the noise-floor suppression fired).
    StabilityBranch branch = StabilityBranch::CORRECTED;
    // The smoothing gate left [0, 1] and was clamped.
    bool gate_clamped = false;
};

/// Pair conjunction. Trigger: s_ab strictly above s_a + s_b keeps s_ab.
/// Otherwise the fused score is amplified away from the stronger atom:
/// s_ab + c * (s_ab - max(s_a, s_b)).
OperatorResult score_and2_detail(const ScoreBundle& b, const OperatorConfig& cfg);

/// Negation of B within the pair. Trigger: s_ab strictly below both atoms
/// keeps s_ab (the fused phrase already rotated away from B). Otherwise
/// subtract B's marginal contribution from s_a, gated by how strongly the
/// candidate matches B relative to the pool: s_a - c * g * (s_ab - s_a)
/// with g = clamp(s_b / (s_b_max + eps), 0, 1), or ungated (g = 1) when
/// cfg.use_smoothed_not is off.
/// Throws NonPositiveMaxError when s_b_max + eps <= 0 (smoothed form only).
OperatorResult score_not2_detail(const ScoreBundle& b, const OperatorConfig& cfg,
                                 double s_b_max);

/// Pair disjunction: max over both atoms, the fused phrase, and the
/// monolithic phrase. Trigger: s_ab strictly below both atoms suppresses to
/// min(s_ab, s_m) instead (a fused phrase scoring under both operands is
/// treated as noise rather than as union evidence).
OperatorResult score_or2_detail(const ScoreBundle& b, const OperatorConfig& cfg);

/// Triple conjunction; same shape as the pair form with a three-way sum
/// trigger and a three-way max in the correction.
OperatorResult score_and3_detail(const ScoreBundle& b, const OperatorConfig& cfg);

/// A and B but not C: the pair conjunction over (s_a, s_b, s_ab) minus C's
/// gated marginal contribution c * g * (s_abc - s_ab),
/// g = clamp(s_c / (s_c_max + eps), 0, 1). The inner conjunction keeps its
/// own stability branch, which is the branch this result reports.
OperatorResult score_and_not3_detail(const ScoreBundle& b,
                                     const OperatorConfig& cfg, double s_c_max);

/// Triple disjunction, extended from the pair rule: max over the three
/// atoms, the fused triple, and the monolithic phrase; suppression to
/// min(s_abc, s_m) when s_abc sits strictly below all three atoms.
OperatorResult score_or3_detail(const ScoreBundle& b, const OperatorConfig& cfg);

double score_and2(const ScoreBundle& b, const OperatorConfig& cfg);
double score_not2(const ScoreBundle& b, const OperatorConfig& cfg, double s_b_max);
double score_or2(const ScoreBundle& b, const OperatorConfig& cfg);
double score_and3(const ScoreBundle& b, const OperatorConfig& cfg);
double score_and_not3(const ScoreBundle& b, const OperatorConfig& cfg,
                      double s_c_max);
double score_or3(const ScoreBundle& b, const OperatorConfig& cfg);

/// Largest s_b / s_c seen across the candidate pool, used as the gate
/// denominators under MaxMode::POOL_MAX.
struct PoolMaxima {
    double s_b_max = 0.0;
    double s_c_max = 0.0;
};

/// Dispatches on the query kind to the matching operator.
OperatorResult score_formula_detail(QueryKind kind, const ScoreBundle& b,
                                    const OperatorConfig& cfg,
                                    const PoolMaxima& pool);
double score_formula(QueryKind kind, const ScoreBundle& b,
                     const OperatorConfig& cfg, const PoolMaxima& pool);

} // namespace nsfl
