#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nsfl/logic_formula.hpp"
#include "nsfl/operators.hpp"

namespace nsfl {

/// Scalar objective over R^d with an analytic gradient. The objective is
/// piecewise smooth: branch triggers and max/min selections switch pieces,
/// and gradient() returns the gradient of the active piece (ties go to the
/// first operand in declared order).
struct Objective {
    std::size_t dim = 0;
    std::function<double(std::span<const double>)> value;
    std::function<std::vector<double>(std::span<const double>)> gradient;
};

/// f(x) = the formula's operator score treating x as the candidate vector,
/// with every component similarity computed as x . v_component. Because no
/// candidate pool exists at optimization time, the smoothing-gate
/// denominator uses the constant bound 1 in place of a pool maximum.
/// When rescale_scores is set, similarities map through (s + 1) / 2 before
/// the operator formulas (triggers included).
Objective build_objective(const QueryPack& pack, const OperatorConfig& cfg,
                          bool rescale_scores = false);

/// g - (x . g) x. Output is tangent to the sphere at x: result . x == 0.
std::vector<double> riemannian_grad(std::span<const double> x,
                                    std::span<const double> g);

/// (x + eta) / ||x + eta||. Throws DegenerateRetractionError when the norm
/// of x + eta is not above 1e-12 (covers NaN steps as well).
std::vector<double> retract(std::span<const double> x,
                            std::span<const double> eta);

struct SqoConfig {
    double learning_rate = 0.2;
    int max_steps = 100;
    int patience = 10;
    double tolerance = 1e-6;
    // Empty: draw the start point from N(0, 1) per coordinate and project.
    // Non-empty: normalize this vector and start there.
    std::vector<double> warm_start;
    std::optional<std::uint64_t> seed;  // unset means 42
    // Return the last iterate instead of the best-observed one.
    bool return_final = false;
};

/// Throws ConfigError unless learning_rate > 0, max_steps >= 1,
/// patience >= 1, tolerance > 0.
void validate(const SqoConfig& cfg);

enum class StopReason { CONVERGED, PATIENCE, MAX_STEPS };
const char* to_string(StopReason r);

struct SqoResult {
    std::vector<double> x_star;
    double final_objective = 0.0;
    int steps_taken = 0;  // objective observations, start point included
    StopReason stop_reason = StopReason::MAX_STEPS;
    std::vector<double> objective_trace;  // one entry per observation
};

/// Snapshot of one accepted update, for invariant checks.
struct SqoStepInfo {
    std::span<const double> x_before;
    std::span<const double> riemannian_grad;
    std::span<const double> x_after;
};
using SqoStepObserver = std::function<void(const SqoStepInfo&)>;

/// Projected-gradient ascent on the unit sphere. Per step: take the
/// objective gradient, project it onto the tangent space at x, retract
/// x + learning_rate * g_R back to the sphere, then record f at the new
/// point. loss = -f drives early stopping: a step "improves" when
/// loss + tolerance < best_loss; `patience` consecutive non-improving
/// steps stop the run (CONVERGED when the final loss sits within
/// tolerance of the best, PATIENCE when it drifted further away).
/// A degenerate retraction aborts with the last valid iterate and
/// MAX_STEPS. Trace and iterates are deterministic for a fixed seed.
SqoResult optimize(const Objective& obj, const SqoConfig& cfg,
                   const SqoStepObserver& observer = {});

/// Convenience wrapper building the pack objective first.
SqoResult optimize(const QueryPack& pack, const SqoConfig& sqo_cfg,
                   const OperatorConfig& op_cfg, bool rescale_scores = false,
                   const SqoStepObserver& observer = {});

} // namespace nsfl
