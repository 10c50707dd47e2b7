#include "nsfl/geometric.hpp"

#include "nsfl/detail/vecmath.hpp"
#include "nsfl/errors.hpp"

namespace nsfl {

namespace {

constexpr double kDegenerateNorm = 1e-10;

std::vector<double> unitize(std::vector<double> v, const char* who) {
    const double n = detail::norm(std::span<const double>(v));
    if (!(n >= kDegenerateNorm)) {
        if (who[0] == 'r')
            throw CollinearError("rejection residual norm " + std::to_string(n) +
                                 " is degenerate (vectors parallel)");
        throw CancellationError("vector sum norm " + std::to_string(n) +
                                " is degenerate (summands cancel)");
    }
    detail::scale(v, 1.0 / n);
    return v;
}

} // namespace

std::vector<double> orthogonal_reject(std::span<const double> v_a,
                                      std::span<const double> v_b) {
    if (v_a.size() != v_b.size())
        throw DimensionError("rejection operands have dims " +
                             std::to_string(v_a.size()) + " and " +
                             std::to_string(v_b.size()));
    const double proj = detail::dot(v_a, v_b);
    std::vector<double> out(v_a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v_a[i] - proj * v_b[i];
    return unitize(std::move(out), "reject");
}

std::vector<double> normalized_sum(
    std::span<const std::vector<double>> vectors) {
    if (vectors.size() < 2)
        throw ConfigError("normalized_sum needs at least 2 vectors, got " +
                          std::to_string(vectors.size()));
    const std::size_t dim = vectors[0].size();
    std::vector<double> out(dim, 0.0);
    for (const auto& v : vectors) {
        if (v.size() != dim)
            throw DimensionError("summand dim " + std::to_string(v.size()) +
                                 " differs from " + std::to_string(dim));
        for (std::size_t i = 0; i < dim; ++i) out[i] += v[i];
    }
    return unitize(std::move(out), "sum");
}

std::vector<double> geometric_query(const QueryPack& pack, bool or_passthrough) {
    auto atom = [&](const char* key) {
        return detail::to_f64(pack.component(key));
    };
    switch (pack.kind) {
        case QueryKind::AND2: {
            std::vector<std::vector<double>> vs{atom("A"), atom("B")};
            return normalized_sum(vs);
        }
        case QueryKind::AND3: {
            std::vector<std::vector<double>> vs{atom("A"), atom("B"), atom("C")};
            return normalized_sum(vs);
        }
        case QueryKind::OR2: {
            if (or_passthrough) return atom("M");
            std::vector<std::vector<double>> vs{atom("A"), atom("B")};
            return normalized_sum(vs);
        }
        case QueryKind::OR3: {
            if (or_passthrough) return atom("M");
            std::vector<std::vector<double>> vs{atom("A"), atom("B"), atom("C")};
            return normalized_sum(vs);
        }
        case QueryKind::NOT2: {
            const auto a = atom("A");
            const auto b = atom("B");
            return orthogonal_reject(a, b);
        }
        case QueryKind::AND_NOT3: {
            std::vector<std::vector<double>> vs{atom("A"), atom("B")};
            const auto ab = normalized_sum(vs);
            const auto c = atom("C");
            return orthogonal_reject(ab, c);
        }
    }
    throw ConfigError("unhandled query kind");
}

} // namespace nsfl
