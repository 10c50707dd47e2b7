#include "nsfl/sqo.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "nsfl/detail/vecmath.hpp"
#include "nsfl/errors.hpp"

namespace nsfl {

namespace {

constexpr double kMinNorm = 1e-12;
constexpr std::uint64_t kDefaultSeed = 42;

// Standard normal via Box-Muller over mt19937_64. Hand-rolled so traces
// do not depend on the standard library's distribution internals.
class GaussianSource {
public:
    explicit GaussianSource(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

private:
    double uniform01() { return double(rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Component vectors and operator parameters frozen into one objective.
struct PackState {
    QueryKind kind;
    double c = 1.0;
    double eps = 1e-8;
    bool use_stability = true;
    bool use_smoothed_not = true;
    bool rescale = false;
    std::size_t dim = 0;
    std::vector<double> a, b, cvec, ab, abc, m;
};

// Partial derivatives of the active piece w.r.t. each component similarity.
struct Partials {
    double a = 0, b = 0, c = 0, ab = 0, abc = 0, m = 0;
};

struct BranchEval {
    double value = 0.0;
    Partials p;
};

double similarity(const PackState& st, std::span<const double> x,
                  const std::vector<double>& v) {
    const double d = detail::dot(x, std::span<const double>(v));
    return st.rescale ? (d + 1.0) * 0.5 : d;
}

BranchEval eval_branches(const PackState& st, std::span<const double> x) {
    // Gate denominator: constant bound 1 stands in for a pool maximum.
    const double gate_denom = 1.0 + st.eps;
    const double sa = similarity(st, x, st.a);
    const double sb = similarity(st, x, st.b);

    BranchEval out;
    switch (st.kind) {
        case QueryKind::AND2: {
            const double sab = similarity(st, x, st.ab);
            if (st.use_stability && sab > sa + sb) {
                out.value = sab;
                out.p.ab = 1.0;
            } else {
                const bool a_max = sa >= sb;
                const double smax = a_max ? sa : sb;
                out.value = sab + st.c * (sab - smax);
                out.p.ab = 1.0 + st.c;
                (a_max ? out.p.a : out.p.b) = -st.c;
            }
            break;
        }
        case QueryKind::NOT2: {
            const double sab = similarity(st, x, st.ab);
            if (st.use_stability && sab < sa && sab < sb) {
                out.value = sab;
                out.p.ab = 1.0;
            } else if (!st.use_smoothed_not) {
                out.value = sa - st.c * (sab - sa);
                out.p.a = 1.0 + st.c;
                out.p.ab = -st.c;
            } else {
                const double raw = sb / gate_denom;
                const double g = std::clamp(raw, 0.0, 1.0);
                out.value = sa - st.c * g * (sab - sa);
                out.p.a = 1.0 + st.c * g;
                out.p.ab = -st.c * g;
                if (g == raw) out.p.b = -st.c * (sab - sa) / gate_denom;
            }
            break;
        }
        case QueryKind::OR2: {
            const double sab = similarity(st, x, st.ab);
            const double sm = similarity(st, x, st.m);
            if (st.use_stability && sab < sa && sab < sb) {
                if (sab <= sm) {
                    out.value = sab;
                    out.p.ab = 1.0;
                } else {
                    out.value = sm;
                    out.p.m = 1.0;
                }
            } else {
                // First attaining operand wins ties, in the order A, B, AB, M.
                const double vals[4] = {sa, sb, sab, sm};
                int best = 0;
                for (int i = 1; i < 4; ++i)
                    if (vals[i] > vals[best]) best = i;
                out.value = vals[best];
                (best == 0   ? out.p.a
                 : best == 1 ? out.p.b
                 : best == 2 ? out.p.ab
                             : out.p.m) = 1.0;
            }
            break;
        }
        case QueryKind::AND3: {
            const double sc = similarity(st, x, st.cvec);
            const double sabc = similarity(st, x, st.abc);
            if (st.use_stability && sabc > sa + sb + sc) {
                out.value = sabc;
                out.p.abc = 1.0;
            } else {
                const double vals[3] = {sa, sb, sc};
                int best = 0;
                for (int i = 1; i < 3; ++i)
                    if (vals[i] > vals[best]) best = i;
                out.value = sabc + st.c * (sabc - vals[best]);
                out.p.abc = 1.0 + st.c;
                (best == 0 ? out.p.a : best == 1 ? out.p.b : out.p.c) = -st.c;
            }
            break;
        }
        case QueryKind::AND_NOT3: {
            const double sc = similarity(st, x, st.cvec);
            const double sab = similarity(st, x, st.ab);
            const double sabc = similarity(st, x, st.abc);
            if (st.use_stability && sab > sa + sb) {
                out.value = sab;
                out.p.ab = 1.0;
            } else {
                const bool a_max = sa >= sb;
                const double smax = a_max ? sa : sb;
                out.value = sab + st.c * (sab - smax);
                out.p.ab = 1.0 + st.c;
                (a_max ? out.p.a : out.p.b) = -st.c;
            }
            const double raw = sc / gate_denom;
            const double g = std::clamp(raw, 0.0, 1.0);
            out.value -= st.c * g * (sabc - sab);
            out.p.abc -= st.c * g;
            out.p.ab += st.c * g;
            if (g == raw) out.p.c -= st.c * (sabc - sab) / gate_denom;
            break;
        }
        case QueryKind::OR3: {
            const double sc = similarity(st, x, st.cvec);
            const double sabc = similarity(st, x, st.abc);
            const double sm = similarity(st, x, st.m);
            if (st.use_stability && sabc < sa && sabc < sb && sabc < sc) {
                if (sabc <= sm) {
                    out.value = sabc;
                    out.p.abc = 1.0;
                } else {
                    out.value = sm;
                    out.p.m = 1.0;
                }
            } else {
                const double vals[5] = {sa, sb, sc, sabc, sm};
                int best = 0;
                for (int i = 1; i < 5; ++i)
                    if (vals[i] > vals[best]) best = i;
                out.value = vals[best];
                (best == 0   ? out.p.a
                 : best == 1 ? out.p.b
                 : best == 2 ? out.p.c
                 : best == 3 ? out.p.abc
                             : out.p.m) = 1.0;
            }
            break;
        }
    }
    return out;
}

std::vector<double> assemble_grad(const PackState& st, const Partials& p) {
    // d(similarity)/dx = v, halved when similarities pass through (s+1)/2.
    const double sfac = st.rescale ? 0.5 : 1.0;
    std::vector<double> g(st.dim, 0.0);
    auto add = [&](double coef, const std::vector<double>& v) {
        if (coef == 0.0 || v.empty()) return;
        const double w = coef * sfac;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * v[i];
    };
    add(p.a, st.a);
    add(p.b, st.b);
    add(p.c, st.cvec);
    add(p.ab, st.ab);
    add(p.abc, st.abc);
    add(p.m, st.m);
    return g;
}

} // namespace

Objective build_objective(const QueryPack& pack, const OperatorConfig& cfg,
                          bool rescale_scores) {
    validate(cfg);
    auto st = std::make_shared<PackState>();
    st->kind = pack.kind;
    st->c = cfg.coefficient_c;
    st->eps = cfg.epsilon;
    st->use_stability = cfg.use_stability;
    st->use_smoothed_not = cfg.use_smoothed_not;
    st->rescale = rescale_scores;
    st->dim = pack.dim();
    st->a = detail::to_f64(pack.component("A"));
    st->b = detail::to_f64(pack.component("B"));
    if (arity(pack.kind) == 3) st->cvec = detail::to_f64(pack.component("C"));
    switch (pack.kind) {
        case QueryKind::AND2:
        case QueryKind::NOT2:
            st->ab = detail::to_f64(pack.component("AB"));
            break;
        case QueryKind::OR2:
            st->ab = detail::to_f64(pack.component("AB"));
            st->m = detail::to_f64(pack.component("M"));
            break;
        case QueryKind::AND3:
            st->abc = detail::to_f64(pack.component("ABC"));
            break;
        case QueryKind::AND_NOT3:
            st->ab = detail::to_f64(pack.component("AB"));
            st->abc = detail::to_f64(pack.component("ABC"));
            break;
        case QueryKind::OR3:
            st->abc = detail::to_f64(pack.component("ABC"));
            st->m = detail::to_f64(pack.component("M"));
            break;
    }

    Objective obj;
    obj.dim = st->dim;
    obj.value = [st](std::span<const double> x) {
        return eval_branches(*st, x).value;
    };
    obj.gradient = [st](std::span<const double> x) {
        return assemble_grad(*st, eval_branches(*st, x).p);
    };
    return obj;
}

std::vector<double> riemannian_grad(std::span<const double> x,
                                    std::span<const double> g) {
    const double radial = detail::dot(x, g);
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] - radial * x[i];
    return out;
}

std::vector<double> retract(std::span<const double> x,
                            std::span<const double> eta) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + eta[i];
    const double n = detail::norm(std::span<const double>(out));
    if (!(n > kMinNorm))
        throw DegenerateRetractionError("retraction norm " + std::to_string(n));
    detail::scale(out, 1.0 / n);
    return out;
}

void validate(const SqoConfig& cfg) {
    if (!(cfg.learning_rate > 0.0))
        throw ConfigError("learning_rate must be positive");
    if (cfg.max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
    if (!(cfg.tolerance > 0.0)) throw ConfigError("tolerance must be positive");
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::CONVERGED: return "converged";
        case StopReason::PATIENCE: return "patience";
        case StopReason::MAX_STEPS: return "max_steps";
    }
    return "?";
}

SqoResult optimize(const Objective& obj, const SqoConfig& cfg,
                   const SqoStepObserver& observer) {
    validate(cfg);
    if (obj.dim < 2) throw ConfigError("objective dimension must be >= 2");

    std::vector<double> x;
    if (!cfg.warm_start.empty()) {
        if (cfg.warm_start.size() != obj.dim)
            throw DimensionError("warm start dim " +
                                 std::to_string(cfg.warm_start.size()) +
                                 " vs objective dim " + std::to_string(obj.dim));
        x = cfg.warm_start;
        const double n = detail::norm(std::span<const double>(x));
        if (!(n > kMinNorm))
            throw DegenerateVectorError("warm start has degenerate norm");
        detail::scale(x, 1.0 / n);
    } else {
        GaussianSource gauss(cfg.seed.value_or(kDefaultSeed));
        x.resize(obj.dim);
        double n = 0.0;
        do {
            for (double& xi : x) xi = gauss.next();
            n = detail::norm(std::span<const double>(x));
        } while (!(n > kMinNorm));
        detail::scale(x, 1.0 / n);
    }

    SqoResult res;
    double f0 = obj.value(x);
    res.objective_trace.push_back(f0);

    double best_loss = -f0;
    std::vector<double> best_x = x;
    int bad_steps = 0;
    res.stop_reason = StopReason::MAX_STEPS;

    double last_loss = best_loss;
    for (int step = 0; step < cfg.max_steps; ++step) {
        std::vector<double> g = obj.gradient(x);
        std::vector<double> g_r = riemannian_grad(x, g);
        std::vector<double> eta(g_r.size());
        for (std::size_t i = 0; i < eta.size(); ++i)
            eta[i] = cfg.learning_rate * g_r[i];

        std::vector<double> x_next;
        try {
            x_next = retract(x, eta);
        } catch (const DegenerateRetractionError&) {
            // Keep the last valid iterate; the caller sees an exhausted run.
            res.stop_reason = StopReason::MAX_STEPS;
            break;
        }
        if (observer) observer(SqoStepInfo{x, g_r, x_next});
        x = std::move(x_next);

        const double f = obj.value(x);
        res.objective_trace.push_back(f);
        last_loss = -f;

        if (last_loss + cfg.tolerance < best_loss) {
            best_loss = last_loss;
            best_x = x;
            bad_steps = 0;
        } else if (++bad_steps >= cfg.patience) {
            res.stop_reason = std::abs(last_loss - best_loss) <= cfg.tolerance
                                  ? StopReason::CONVERGED
                                  : StopReason::PATIENCE;
            break;
        }
    }

    res.steps_taken = int(res.objective_trace.size());
    if (cfg.return_final) {
        res.x_star = std::move(x);
        res.final_objective = res.objective_trace.back();
    } else {
        res.x_star = std::move(best_x);
        res.final_objective = -best_loss;
    }
    return res;
}

SqoResult optimize(const QueryPack& pack, const SqoConfig& sqo_cfg,
                   const OperatorConfig& op_cfg, bool rescale_scores,
                   const SqoStepObserver& observer) {
    return optimize(build_objective(pack, op_cfg, rescale_scores), sqo_cfg,
                    observer);
}

} // namespace nsfl
