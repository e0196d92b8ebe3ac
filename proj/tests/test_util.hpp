#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "nrde/signature.hpp"
#include "nrde/tensor_algebra.hpp"

namespace nrde::test {

inline TruncatedTensor random_tensor(std::mt19937_64& rng, TensorShape sh, bool zero_scalar = false) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TruncatedTensor t(sh);
    for (double& c : t.coeffs()) c = u(rng);
    if (zero_scalar) t.scalar() = 0.0;
    return t;
}

inline double max_abs_diff(const TruncatedTensor& a, const TruncatedTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.coeffs()[i] - b.coeffs()[i]));
    return m;
}

/// Tensor as a map from words to coefficients: an independent representation.
using WordMap = std::map<std::vector<int>, double>;

inline WordMap to_words(const TruncatedTensor& t) {
    WordMap m;
    std::vector<int> w;
    const int d = t.dim();
    for (int k = 0; k <= t.depth(); ++k) {
        w.assign(static_cast<std::size_t>(k), 0);
        std::span<const double> lv = t.level(k);
        for (std::size_t idx = 0; idx < lv.size(); ++idx) {
            std::size_t r = idx;
            for (int p = k - 1; p >= 0; --p) {
                w[static_cast<std::size_t>(p)] = static_cast<int>(r % static_cast<std::size_t>(d));
                r /= static_cast<std::size_t>(d);
            }
            m[w] = lv[idx];
        }
    }
    return m;
}

inline WordMap word_mul(const WordMap& a, const WordMap& b, int depth) {
    WordMap c;
    for (const auto& [wa, ca] : a)
        for (const auto& [wb, cb] : b) {
            if (static_cast<int>(wa.size() + wb.size()) > depth) continue;
            std::vector<int> w = wa;
            w.insert(w.end(), wb.begin(), wb.end());
            c[w] += ca * cb;
        }
    return c;
}

inline PiecewiseLinearPath random_path(std::mt19937_64& rng, std::size_t points, int data_dim, double scale = 1.0) {
    std::uniform_real_distribution<double> dt(0.1, 1.0), dx(-scale, scale);
    std::vector<double> t(points), v(points * static_cast<std::size_t>(data_dim));
    t[0] = dt(rng);
    for (std::size_t i = 1; i < points; ++i) t[i] = t[i - 1] + dt(rng);
    for (double& x : v) x = dx(rng);
    return PiecewiseLinearPath(std::move(t), std::move(v), data_dim);
}

}  // namespace nrde::test
