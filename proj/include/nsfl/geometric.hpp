#pragma once

#include <span>
#include <vector>

#include "nsfl/logic_formula.hpp"

namespace nsfl {

/// Removes v_b's direction from v_a and renormalizes:
/// normalize(v_a - (v_a . v_b) v_b). Inputs are unit vectors.
/// Throws CollinearError when the residual norm falls below 1e-10.
std::vector<double> orthogonal_reject(std::span<const double> v_a,
                                      std::span<const double> v_b);

/// normalize(sum of vectors); needs at least two unit vectors of equal dim.
/// Throws CancellationError when the sum's norm falls below 1e-10.
std::vector<double> normalized_sum(
    std::span<const std::vector<double>> vectors);

/// Compiles a query pack into a single unit vector by vector arithmetic:
///   and2 / and3      sum of the atom vectors
///   or2 / or3        sum of the atom vectors, or the monolithic vector
///                    verbatim when or_passthrough is set
///   not2             reject(v_A, v_B)
///   and_not3         reject(v_A + v_B, v_C)
std::vector<double> geometric_query(const QueryPack& pack,
                                    bool or_passthrough = false);

} // namespace nsfl
