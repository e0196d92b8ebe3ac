#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "nrde/dataset.hpp"
#include "nrde/errors.hpp"
#include "nrde/signature.hpp"

namespace nrde {

struct SyntheticConfig {
    std::size_t count = 300;
    std::size_t length = 2048;  // samples per series
    int classes = 2;
    std::uint64_t seed = 0;
    double noise = 0.2;       // per-sample Gaussian noise on both channels
    double amplitude = 1.0;   // mean loop radius
    double cycles = 2.0;      // revolutions over the series for class pair 0/1
};

/// Two-channel long series on a regular time grid. Each class traces noisy
/// loops of the same radius distribution and random phase; class k turns
/// clockwise for odd k and counter-clockwise for even k, and each pair
/// (2j, 2j+1) turns j+1 times faster. Marginals of each channel agree across a
/// pair; only the rotation sense (signed area) tells them apart.
inline Dataset gen_synthetic_classification(const SyntheticConfig& cfg) {
    if (cfg.length < 64) throw DomainError("synthetic series need length >= 64");
    if (cfg.classes < 2) throw DomainError("synthetic classification needs at least 2 classes");
    if (cfg.count < 1) throw DomainError("synthetic dataset needs at least one sample");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> radius_dist(0.8 * cfg.amplitude, 1.2 * cfg.amplitude);
    std::normal_distribution<double> noise(0.0, cfg.noise);

    Dataset ds;
    ds.num_classes = cfg.classes;
    const std::size_t n = cfg.length;
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i);
    for (std::size_t s = 0; s < cfg.count; ++s) {
        const int label = static_cast<int>(s % static_cast<std::size_t>(cfg.classes));
        const double sense = (label % 2 == 0) ? 1.0 : -1.0;
        const double freq = cfg.cycles * static_cast<double>(label / 2 + 1);
        const double phase = phase_dist(rng);
        const double radius = radius_dist(rng);
        std::vector<double> values(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const double theta = phase + 2.0 * std::numbers::pi * freq * static_cast<double>(i) / static_cast<double>(n);
            values[2 * i] = radius * std::cos(theta) + noise(rng);
            values[2 * i + 1] = sense * radius * std::sin(theta) + noise(rng);
        }
        ds.paths.emplace_back(times, std::move(values), 2);
        ds.targets.push_back(Target{label, {}});
    }
    return ds;
}

inline Dataset gen_synthetic_classification(std::size_t count, std::size_t length, int classes, std::uint64_t seed) {
    SyntheticConfig cfg;
    cfg.count = count;
    cfg.length = length;
    cfg.classes = classes;
    cfg.seed = seed;
    return gen_synthetic_classification(cfg);
}

/// Fine piecewise-linear sample of (t, W_t) on [0, horizon] with `steps` cells.
struct BrownianDriver {
    PiecewiseLinearPath path;
    double mesh = 0.0;
    std::uint64_t seed = 0;

    static BrownianDriver sample(double horizon, std::size_t steps, std::uint64_t seed) {
        if (!(horizon > 0.0)) throw DomainError("Brownian horizon must be positive");
        if (steps < 1) throw DomainError("Brownian driver needs at least one step");
        BrownianDriver b;
        b.mesh = horizon / static_cast<double>(steps);
        b.seed = seed;
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> inc(0.0, std::sqrt(b.mesh));
        std::vector<double> t(steps + 1), w(steps + 1, 0.0);
        for (std::size_t i = 0; i <= steps; ++i) t[i] = (i == steps) ? horizon : b.mesh * static_cast<double>(i);
        for (std::size_t i = 1; i <= steps; ++i) w[i] = w[i - 1] + inc(rng);
        b.path = PiecewiseLinearPath(std::move(t), std::move(w), 1);
        return b;
    }
};

}  // namespace nrde
