#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nrde/cde_solver.hpp"
#include "nrde/errors.hpp"
#include "nrde/synthetic.hpp"

namespace nrde {

/// dy = a(b - y) dt + sigma y dW, driven by X = (t, W).
struct IgbmParams {
    double a = 0.1;
    double b = 0.04;
    double sigma = 0.6;
    double y0 = 0.06;
    double horizon = 5.0;
    std::size_t fine_steps = 100000;
    std::uint64_t seed = 0;
    std::size_t rk4_substeps = 8;  // per coarse interval
};

struct IgbmRow {
    std::size_t coarse_steps = 0;
    double error_depth3 = 0.0;
    double error_depth1 = 0.0;
};

struct IgbmReport {
    double reference = 0.0;  // depth-1 solve on the fine mesh
    std::vector<IgbmRow> rows;
};

inline LinearVectorField igbm_field(double a, double b, double sigma) {
    LinearVectorField f = LinearVectorField::zeros(1, 2);
    f.a[0](0, 0) = -a;
    f.b[0][0] = a * b;
    f.a[1](0, 0) = sigma;
    return f;
}

inline void validate(const IgbmParams& p) {
    if (!(p.a >= 0.0) || !(p.b >= 0.0) || !(p.sigma >= 0.0))
        throw DomainError("IGBM parameters a, b, sigma must be non-negative");
    if (!std::isfinite(p.y0)) throw DomainError("IGBM initial value must be finite");
    if (!(p.horizon > 0.0) || !std::isfinite(p.horizon)) throw DomainError("IGBM horizon must be positive");
    if (p.fine_steps < 1 || p.rk4_substeps < 1) throw DomainError("IGBM mesh and substeps must be positive");
}

inline std::vector<double> uniform_partition(double a, double b, std::size_t steps) {
    std::vector<double> r(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i)
        r[i] = (i == steps) ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(steps);
    return r;
}

/// Terminal absolute errors of depth-3 and depth-1 log-ODE solves against the
/// fine-mesh depth-1 reference, for each requested coarse step count.
inline IgbmReport igbm_demo(const IgbmParams& p, std::span<const std::size_t> coarse_steps) {
    validate(p);
    for (std::size_t n : coarse_steps)
        if (n < 1) throw DomainError("coarse step count must be positive");
    const BrownianDriver drv = BrownianDriver::sample(p.horizon, p.fine_steps, p.seed);
    const LinearVectorField f = igbm_field(p.a, p.b, p.sigma);
    const Vec y0{p.y0};

    IgbmReport rep;
    rep.reference = logode_solve(f, y0, drv.path, drv.path.times(), 1, OdeSolveConfig{2}).back()[0];
    const OdeSolveConfig cfg{p.rk4_substeps};
    for (std::size_t n : coarse_steps) {
        const std::vector<double> part = uniform_partition(0.0, p.horizon, n);
        IgbmRow row;
        row.coarse_steps = n;
        row.error_depth3 = std::abs(logode_solve(f, y0, drv.path, part, 3, cfg).back()[0] - rep.reference);
        row.error_depth1 = std::abs(logode_solve(f, y0, drv.path, part, 1, cfg).back()[0] - rep.reference);
        rep.rows.push_back(row);
    }
    return rep;
}

/// Noise-free solution b + (y0 - b) exp(-a T).
inline double igbm_deterministic(const IgbmParams& p) { return p.b + (p.y0 - p.b) * std::exp(-p.a * p.horizon); }

}  // namespace nrde
