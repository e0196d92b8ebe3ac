// Acceptance suite: one PASS/FAIL line per criterion, on stdout and in
// acceptance_report.txt. Optional arguments select criteria by number, e.g.
// `acceptance 1 3 5`.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "nrde/cde_solver.hpp"
#include "nrde/grid.hpp"
#include "nrde/igbm.hpp"
#include "nrde/nrde_model.hpp"
#include "nrde/synthetic.hpp"

using namespace nrde;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[1024];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

double max_abs(const TruncatedTensor& a, const TruncatedTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.coeffs().size(); ++i) m = std::max(m, std::abs(a.coeffs()[i] - b.coeffs()[i]));
    return m;
}

TruncatedTensor random_tensor(std::mt19937_64& rng, const TensorShape& sh, bool zero_scalar) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> c(sh.size());
    for (double& x : c) x = u(rng);
    c[0] = zero_scalar ? 0.0 : 1.0 + 0.5 * u(rng);
    return TruncatedTensor(sh, std::move(c));
}

PiecewiseLinearPath random_path(std::mt19937_64& rng, std::size_t points, int data_dim, double scale = 1.0) {
    std::uniform_real_distribution<double> dt(0.1, 1.0), dx(-scale, scale);
    std::vector<double> t(points), v(points * static_cast<std::size_t>(data_dim));
    t[0] = dt(rng);
    for (std::size_t i = 1; i < points; ++i) t[i] = t[i - 1] + dt(rng);
    for (double& x : v) x = dx(rng);
    return PiecewiseLinearPath(std::move(t), std::move(v), data_dim);
}

double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// Least-squares slope of log2(err) against log2(intervals), negated.
double empirical_order(const std::vector<double>& intervals, const std::vector<double>& errors) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(intervals.size());
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const double x = std::log2(intervals[i]), y = std::log2(errors[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return -(k * sxy - sx * sy) / (k * sxx - sx * sx);
}

NrdeConfig small_model(int depth, std::size_t channels) {
    NrdeConfig c;
    c.input_channels = channels;
    c.hidden = 4;
    c.field_width = 8;
    c.field_layers = 2;
    c.outputs = 2;
    c.depth = depth;
    c.substeps = 2;
    return c;
}

Outcome algebra() {
    std::mt19937_64 rng(1001);
    double assoc = 0.0, distrib = 0.0, roundtrip = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const TensorShape sh(1 + trial % 3, 1 + (trial / 3) % 4);
        const TruncatedTensor a = random_tensor(rng, sh, false), b = random_tensor(rng, sh, false),
                              c = random_tensor(rng, sh, false);
        assoc = std::max(assoc, max_abs((a * b) * c, a * (b * c)));
        distrib = std::max(distrib, max_abs(a * (b + c), a * b + a * c));
        const TruncatedTensor z = random_tensor(rng, sh, true);
        roundtrip = std::max(roundtrip, max_abs(tensor_log(tensor_exp(z)), z));
    }
    return {assoc <= 1e-10 && distrib <= 1e-10 && roundtrip <= 1e-10,
            fmt("assoc %.1e distrib %.1e exp/log %.1e (tol 1e-10)", assoc, distrib, roundtrip)};
}

Outcome signature_identities() {
    std::mt19937_64 rng(1002);
    double shuffle = 0.0, chen = 0.0, brute = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const PiecewiseLinearPath p = random_path(rng, 2 + static_cast<std::size_t>(trial % 9), 1);
        const TruncatedTensor s = path_signature(p, 4);
        const double prod = s.at({0}) * s.at({1});
        shuffle = std::max(shuffle, std::abs(s.at({0, 1}) + s.at({1, 0}) - prod) / (1.0 + std::abs(prod)));
        std::uniform_real_distribution<double> u(p.start(), p.end());
        const double mid = u(rng);
        chen = std::max(chen, max_abs(path_signature(p, p.start(), mid, 4) * path_signature(p, mid, p.end(), 4), s));
    }
    for (int trial = 0; trial < 50; ++trial) {
        const PiecewiseLinearPath p = random_path(rng, 2 + static_cast<std::size_t>(trial % 3), 1);
        brute = std::max(brute, max_abs(brute_force_signature(p, p.start(), p.end(), 3, 10000), path_signature(p, 3)));
    }
    return {shuffle <= 1e-10 && chen <= 1e-12 && brute <= 1e-6,
            fmt("shuffle %.1e (tol 1e-10 rel) chen %.1e (tol 1e-12) brute-force %.1e (tol 1e-6)", shuffle, chen,
                brute)};
}

/// Words of length n over d letters strictly smaller than each nontrivial rotation.
std::int64_t rotation_minimal_count(int d, int n) {
    std::int64_t total = 1;
    for (int i = 0; i < n; ++i) total *= d;
    std::int64_t count = 0;
    std::vector<int> w(static_cast<std::size_t>(n));
    for (std::int64_t code = 0; code < total; ++code) {
        std::int64_t c = code;
        for (int i = n - 1; i >= 0; --i) {
            w[static_cast<std::size_t>(i)] = static_cast<int>(c % d);
            c /= d;
        }
        bool minimal = true;
        for (int r = 1; r < n && minimal; ++r) {
            std::vector<int> rot(w.begin() + r, w.end());
            rot.insert(rot.end(), w.begin(), w.begin() + r);
            if (!(w < rot)) minimal = false;
        }
        if (minimal) ++count;
    }
    return count;
}

Outcome lyndon_dimension() {
    int mismatches = 0, checked = 0;
    for (int d = 1; d <= 5; ++d)
        for (int depth = 1; depth <= 6; ++depth) {
            std::int64_t expect = 0;
            for (int n = 1; n <= depth; ++n) expect += rotation_minimal_count(d, n);
            if (logsig_dim(d, depth) != expect) ++mismatches;
            ++checked;
        }
    return {mismatches == 0, fmt("%d of %d (d, N) pairs match exactly", checked - mismatches, checked)};
}

Outcome logode_convergence() {
    std::mt19937_64 rng(1004);
    LinearVectorField f = LinearVectorField::zeros(2, 2);
    std::normal_distribution<double> g(0.0, 0.8);
    for (auto& m : f.a)
        for (double& x : m.data) x = g(rng);
    for (auto& b : f.b)
        for (double& x : b) x = g(rng);
    const std::size_t fine = 4096;
    std::vector<double> t(fine + 1), v(fine + 1);
    for (std::size_t i = 0; i <= fine; ++i) {
        t[i] = static_cast<double>(i) / fine;
        v[i] = std::sin(2.0 * std::numbers::pi * t[i]);
    }
    const PiecewiseLinearPath path(t, v, 1);
    const Vec y0{1.0, -0.5};
    const Vec ref = linear_cde_reference(f, y0, path, 1 << 14, 2);

    const std::vector<double> intervals{8, 16, 32, 64, 128};
    std::vector<std::vector<double>> err(4);
    bool ok = true;
    std::string detail;
    for (int depth = 1; depth <= 3; ++depth) {
        for (double k : intervals) {
            const std::vector<double> part = index_partition(path, fine / static_cast<std::size_t>(k));
            err[static_cast<std::size_t>(depth)].push_back(
                dist(logode_solve(f, y0, path, part, depth, OdeSolveConfig{64}).back(), ref));
        }
        const double order = empirical_order(intervals, err[static_cast<std::size_t>(depth)]);
        ok = ok && order >= depth - 0.2;
        detail += fmt("N=%d order %.2f (min %.1f); ", depth, order, depth - 0.2);
    }
    bool beats = true;
    for (std::size_t i = 0; i < intervals.size(); ++i) beats = beats && err[2][i] < err[1][i];
    detail += beats ? "depth-2 < depth-1 at all step counts" : "depth-2 not below depth-1 everywhere";
    return {ok && beats, detail};
}

Outcome ncde_reduction() {
    std::mt19937_64 rng(1005);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        NrdeModel m(small_model(1, 3));
        m.init_seeded(static_cast<std::uint64_t>(trial));
        const PiecewiseLinearPath p = random_path(rng, 10 + static_cast<std::size_t>(trial), 2);
        const ForwardResult a = nrde_forward(m, logsig_stream(p, p.times(), 1), p.point(0));
        const ForwardResult b = ncde_forward(m, p);
        for (std::size_t i = 0; i < a.hidden.size(); ++i) worst = std::max(worst, dist(a.hidden[i], b.hidden[i]));
        for (std::size_t i = 0; i < a.outputs.size(); ++i) worst = std::max(worst, dist(a.outputs[i], b.outputs[i]));
    }
    return {worst <= 1e-10, fmt("max deviation %.1e (tol 1e-10) over 20 models", worst)};
}

Outcome gradients() {
    std::mt19937_64 rng(1006);
    NrdeModel m(small_model(2, 3));
    m.init_seeded(6);
    const PiecewiseLinearPath p = random_path(rng, 10, 2, 0.5);
    const Sample s{logsig_stream(p, index_partition(p, 3), 2), p.point(0), Target{1, {}}};
    const GradResult bp = backprop_through_solver(m, s, LossKind::CrossEntropy);

    std::vector<std::size_t> idx(m.num_params());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(24);
    const std::vector<double> base = m.parameters();
    double worst_rel = 0.0;
    const double h = 1e-6;
    for (std::size_t i : idx) {
        std::vector<double> pp = base, pm = base;
        pp[i] += h;
        pm[i] -= h;
        NrdeModel a = m, b = m;
        a.set_parameters(pp);
        b.set_parameters(pm);
        const double lp = loss(nrde_forward(a, s.stream, s.x0).outputs, s.target, LossKind::CrossEntropy).loss;
        const double lm = loss(nrde_forward(b, s.stream, s.x0).outputs, s.target, LossKind::CrossEntropy).loss;
        const double fd = (lp - lm) / (2 * h);
        worst_rel = std::max(worst_rel, std::abs(bp.grad[i] - fd) / std::max(std::abs(fd), 1e-4));
    }

    std::vector<double> gaps;
    for (std::size_t sub : {4u, 8u, 16u, 32u}) {
        NrdeModel ref = m;
        ref.mutable_config().substeps = sub;
        const GradResult exact = backprop_through_solver(ref, s, LossKind::CrossEntropy);
        const GradResult adj = adjoint_backward(m, s, LossKind::CrossEntropy, sub);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < exact.grad.size(); ++i) {
            num += (adj.grad[i] - exact.grad[i]) * (adj.grad[i] - exact.grad[i]);
            den += exact.grad[i] * exact.grad[i];
        }
        gaps.push_back(std::sqrt(num / den));
    }
    bool monotone = true;
    for (std::size_t i = 1; i < gaps.size(); ++i) monotone = monotone && gaps[i] < gaps[i - 1];
    return {s.stream.num_intervals() == 3 && worst_rel <= 1e-4 && gaps.back() <= 1e-3 && monotone,
            fmt("FD rel %.1e over %zu params (tol 1e-4); adjoint gap %.1e/%.1e/%.1e/%.1e at 4/8/16/32 substeps "
                "(tol 1e-3, %s)",
                worst_rel, idx.size(), gaps[0], gaps[1], gaps[2], gaps[3], monotone ? "monotone" : "not monotone")};
}

Outcome igbm() {
    IgbmParams p;
    const std::vector<std::size_t> steps{25, 1000};
    int within = 0;
    std::string ratios;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        p.seed = seed;
        const IgbmReport r = igbm_demo(p, steps);
        const double ratio = r.rows[0].error_depth3 / r.rows[1].error_depth1;
        if (ratio >= 0.1 && ratio <= 10.0) ++within;
        ratios += fmt("%.2g ", ratio);
    }
    return {within >= 8, fmt("%d/10 seeds with depth-3@25 / depth-1@1000 error ratio in [0.1, 10] (need 8): %s",
                             within, ratios.c_str())};
}

Outcome desk_trend() {
    SyntheticConfig sc;
    sc.count = 300;
    sc.length = 2048;
    sc.seed = 7;
    Dataset ds = gen_synthetic_classification(sc);
    normalize_split(ds, {}, 7);
    NrdeConfig mc;
    mc.hidden = 8;
    mc.field_width = 16;
    mc.field_layers = 2;
    mc.outputs = 2;
    mc.substeps = 1;
    TrainConfig tc;
    tc.max_epochs = 100;
    tc.seed = 7;
    BenchmarkGrid g;
    g.depths = {1, 2};
    g.steps = {1, 8, 32};
    const GridResult r = run_grid(ds, g, mc, tc);
    auto cell = [&](int depth, std::size_t step) -> const GridCell& {
        for (const GridCell& c : r.cells)
            if (c.depth == depth && c.step == step) return c;
        throw std::logic_error("missing grid cell");
    };
    bool ok = true;
    std::string detail;
    for (const GridCell& c : r.cells) {
        ok = ok && c.error.empty();
        detail += fmt("N%d/s%zu acc %.3f %.3fs/ep; ", c.depth, c.step, c.metric, c.wall_clock_s);
    }
    bool decreasing = true;
    for (int depth : g.depths)
        for (std::size_t i = 1; i < g.steps.size(); ++i)
            decreasing = decreasing && cell(depth, g.steps[i]).wall_clock_s < cell(depth, g.steps[i - 1]).wall_clock_s;
    const double d1 = cell(1, 32).metric, d2 = cell(2, 32).metric;
    const bool depth_ok = d2 >= d1 - 0.02 && d2 >= 0.85;
    return {ok && decreasing && depth_ok, detail + (decreasing ? "wall-clock decreasing in step" : "wall-clock NOT decreasing")};
}

Outcome peak_memory() {
    std::mt19937_64 rng(1009);
    NrdeModel m(small_model(2, 3));
    m.init_seeded(9);
    const PiecewiseLinearPath p = random_path(rng, 1025, 2, 0.3);
    const Sample s{logsig_stream(p, index_partition(p, 2), 2), p.point(0), Target{0, {}}};
    const GradResult bp = backprop_through_solver(m, s, LossKind::CrossEntropy);
    const GradResult adj = adjoint_backward(m, s, LossKind::CrossEntropy, m.config().substeps);
    const double ratio = static_cast<double>(adj.peak_live_values) / static_cast<double>(bp.peak_live_values);
    return {s.stream.num_intervals() == 512 && ratio <= 0.2,
            fmt("adjoint %zu vs backprop %zu live values over %zu intervals: ratio %.3f (max 0.20)",
                adj.peak_live_values, bp.peak_live_values, s.stream.num_intervals(), ratio)};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "tensor algebra", 10.0, algebra},
        {2, "signature identities", 120.0, signature_identities},
        {3, "Lyndon dimension", 5.0, lyndon_dimension},
        {4, "log-ODE convergence", 60.0, logode_convergence},
        {5, "NCDE reduction", 30.0, ncde_reduction},
        {6, "gradient correctness", 60.0, gradients},
        {7, "IGBM high-order demo", 120.0, igbm},
        {8, "desk-scale depth x step trend", 1800.0, desk_trend},
        {9, "peak live-value proxy", 300.0, peak_memory},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

    std::FILE* report = std::fopen("acceptance_report.txt", "w");
    int failures = 0;
    for (const Criterion& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.budget_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failures;
        const std::string line = fmt("%s %d %s: %s [%.1f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                                     o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
        std::fputs(line.c_str(), stdout);
        std::fflush(stdout);
        if (report) {
            std::fputs(line.c_str(), report);
            std::fflush(report);
        }
    }
    if (report) std::fclose(report);
    return failures == 0 ? 0 : 1;
}
