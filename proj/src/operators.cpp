#include "nsfl/operators.hpp"

#include <algorithm>
#include <cmath>

#include "nsfl/errors.hpp"

namespace nsfl {

namespace {

double require(const std::optional<double>& v, const char* key) {
    if (!v) throw MissingComponentError(key);
    return *v;
}

// clamp(s / (s_max + eps), 0, 1); sets *clamped when the raw ratio left
// [0, 1]. Raw cosines can be negative, and without the clamp a negative
// gate would flip the sign of the penalty it scales.
double gate(double s, double s_max, double eps, bool* clamped) {
    const double denom = s_max + eps;
    if (!(denom > 0.0))
        throw NonPositiveMaxError("gate denominator " + std::to_string(denom) +
                                  " is not positive");
    const double raw = s / denom;
    const double g = std::clamp(raw, 0.0, 1.0);
    if (clamped && g != raw) *clamped = true;
    return g;
}

} // namespace

NSDelta delta(double s_fused, double s_context) {
    NSDelta d;
    d.value = s_fused - s_context;
    d.direction = d.value >= 0.0 ? DeltaDirection::REINFORCEMENT
                                 : DeltaDirection::DEPARTURE;
    return d;
}

const std::string& minchoice(std::span<const AtomScore> scores, int j) {
    if (j < 1 || std::size_t(j) > scores.size())
        throw RankOutOfRangeError("rank " + std::to_string(j) + " for " +
                                  std::to_string(scores.size()) + " atoms");
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (scores[l].score != scores[r].score)
            return scores[l].score < scores[r].score;
        return scores[l].atom < scores[r].atom;
    });
    return scores[order[std::size_t(j) - 1]].atom;
}

void validate(const OperatorConfig& cfg) {
    if (!(cfg.coefficient_c >= 0.0 && cfg.coefficient_c <= 2.0))
        throw ConfigError("coefficient_c " + std::to_string(cfg.coefficient_c) +
                          " outside [0, 2]");
    if (!(cfg.epsilon > 0.0))
        throw ConfigError("epsilon must be positive, got " +
                          std::to_string(cfg.epsilon));
}

OperatorResult score_and2_detail(const ScoreBundle& b, const OperatorConfig& cfg) {
    if (cfg.use_stability && b.s_ab > b.s_a + b.s_b)
        return {b.s_ab, StabilityBranch::STABLE, false};
    const double score =
        b.s_ab + cfg.coefficient_c * (b.s_ab - std::max(b.s_a, b.s_b));
    return {score, StabilityBranch::CORRECTED, false};
}

OperatorResult score_not2_detail(const ScoreBundle& b, const OperatorConfig& cfg,
                                 double s_b_max) {
    if (cfg.use_stability && b.s_ab < b.s_a && b.s_ab < b.s_b)
        return {b.s_ab, StabilityBranch::STABLE, false};
    if (!cfg.use_smoothed_not) {
        const double score = b.s_a - cfg.coefficient_c * (b.s_ab - b.s_a);
        return {score, StabilityBranch::CORRECTED, false};
    }
    bool clamped = false;
    const double g = gate(b.s_b, s_b_max, cfg.epsilon, &clamped);
    const double score = b.s_a - cfg.coefficient_c * g * (b.s_ab - b.s_a);
    return {score, StabilityBranch::CORRECTED, clamped};
}

OperatorResult score_or2_detail(const ScoreBundle& b, const OperatorConfig& cfg) {
    if (cfg.use_stability && b.s_ab < b.s_a && b.s_ab < b.s_b)
        return {std::min(b.s_ab, b.s_m), StabilityBranch::STABLE, false};
    const double score = std::max({b.s_a, b.s_b, b.s_ab, b.s_m});
    return {score, StabilityBranch::CORRECTED, false};
}

OperatorResult score_and3_detail(const ScoreBundle& b, const OperatorConfig& cfg) {
    const double s_c = require(b.s_c, "C");
    const double s_abc = require(b.s_abc, "ABC");
    if (cfg.use_stability && s_abc > b.s_a + b.s_b + s_c)
        return {s_abc, StabilityBranch::STABLE, false};
    const double score =
        s_abc + cfg.coefficient_c * (s_abc - std::max({b.s_a, b.s_b, s_c}));
    return {score, StabilityBranch::CORRECTED, false};
}

OperatorResult score_and_not3_detail(const ScoreBundle& b,
                                     const OperatorConfig& cfg, double s_c_max) {
    const double s_c = require(b.s_c, "C");
    const double s_abc = require(b.s_abc, "ABC");
    OperatorResult inner = score_and2_detail(b, cfg);
    bool clamped = false;
    const double g = gate(s_c, s_c_max, cfg.epsilon, &clamped);
    inner.score -= cfg.coefficient_c * g * (s_abc - b.s_ab);
    inner.gate_clamped = clamped;
    return inner;
}

OperatorResult score_or3_detail(const ScoreBundle& b, const OperatorConfig& cfg) {
    const double s_c = require(b.s_c, "C");
    const double s_abc = require(b.s_abc, "ABC");
    if (cfg.use_stability && s_abc < b.s_a && s_abc < b.s_b && s_abc < s_c)
        return {std::min(s_abc, b.s_m), StabilityBranch::STABLE, false};
    const double score = std::max({b.s_a, b.s_b, s_c, s_abc, b.s_m});
    return {score, StabilityBranch::CORRECTED, false};
}

double score_and2(const ScoreBundle& b, const OperatorConfig& cfg) {
    return score_and2_detail(b, cfg).score;
}
double score_not2(const ScoreBundle& b, const OperatorConfig& cfg,
                  double s_b_max) {
    return score_not2_detail(b, cfg, s_b_max).score;
}
double score_or2(const ScoreBundle& b, const OperatorConfig& cfg) {
    return score_or2_detail(b, cfg).score;
}
double score_and3(const ScoreBundle& b, const OperatorConfig& cfg) {
    return score_and3_detail(b, cfg).score;
}
double score_and_not3(const ScoreBundle& b, const OperatorConfig& cfg,
                      double s_c_max) {
    return score_and_not3_detail(b, cfg, s_c_max).score;
}
double score_or3(const ScoreBundle& b, const OperatorConfig& cfg) {
    return score_or3_detail(b, cfg).score;
}

OperatorResult score_formula_detail(QueryKind kind, const ScoreBundle& b,
                                    const OperatorConfig& cfg,
                                    const PoolMaxima& pool) {
    switch (kind) {
        case QueryKind::AND2: return score_and2_detail(b, cfg);
        case QueryKind::NOT2: return score_not2_detail(b, cfg, pool.s_b_max);
        case QueryKind::OR2: return score_or2_detail(b, cfg);
        case QueryKind::AND3: return score_and3_detail(b, cfg);
        case QueryKind::AND_NOT3:
            return score_and_not3_detail(b, cfg, pool.s_c_max);
        case QueryKind::OR3: return score_or3_detail(b, cfg);
    }
    throw ConfigError("unhandled query kind");
}

double score_formula(QueryKind kind, const ScoreBundle& b,
                     const OperatorConfig& cfg, const PoolMaxima& pool) {
    return score_formula_detail(kind, b, cfg, pool).score;
}

} // namespace nsfl
