#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

// Small dense-vector helpers. Storage is float, accumulation is double;
// inputs of mixed precision share the double code paths via std::span.

namespace nsfl::detail {

inline double dot(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
    return acc;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double dot(std::span<const double> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * double(b[i]);
    return acc;
}

inline double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }
inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void scale(std::span<double> a, double s) {
    for (double& x : a) x *= s;
}

inline std::vector<double> to_f64(std::span<const float> a) {
    return std::vector<double>(a.begin(), a.end());
}

inline std::vector<float> to_f32(std::span<const double> a) {
    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = float(a[i]);
    return out;
}

} // namespace nsfl::detail
