#pragma once

// Controlled differential equations dY = f(Y) dX with explicit vector fields:
// fixed-step RK4, vector-field derivatives f∘k, the Taylor method, the log-ODE
// method and a fine-mesh reference solver.
//
// Conventions. A field f maps y in R^n to d column vectors f_0(y)..f_{d-1}(y),
// one per driving channel (channel 0 is time for embedded paths). The
// derivative block f∘k(y) is stored as d^k columns of length n, the column of
// word (i1,...,ik) at its level-k flat index. The innermost integral acts
// first: f∘2(y)[(i,j)] = Df_j(y) f_i(y), so for affine channels
// f_i(y) = A_i y + b_i we get f∘k(y)[(i1..ik)] = A_ik ... A_i2 (A_i1 y + b_i1).

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nrde/errors.hpp"
#include "nrde/linalg.hpp"
#include "nrde/lyndon.hpp"
#include "nrde/signature.hpp"
#include "nrde/tensor_algebra.hpp"

namespace nrde {

struct OdeSolveConfig {
    std::size_t substeps = 8;  // uniform RK4 steps per interval
};

/// One classical RK4 step of size h from (z, u).
template <class Field>
Vec rk4_step(Field& f, const Vec& z, double u, double h) {
    const std::size_t n = z.size();
    Vec k1 = f(z, u);
    Vec tmp(n);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
    Vec k2 = f(tmp, u + 0.5 * h);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
    Vec k3 = f(tmp, u + 0.5 * h);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + h * k3[i];
    Vec k4 = f(tmp, u + h);
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Integrates dz/du = f(z, u) over [u0, u1] with `substeps` uniform RK4 steps.
template <class Field>
Vec rk4_solve(Field&& f, Vec z0, double u0, double u1, std::size_t substeps) {
    if (substeps < 1) throw DomainError("rk4_solve needs substeps >= 1");
    if (!all_finite(z0)) throw OverflowError("rk4_solve initial state", 0);
    const double h = (u1 - u0) / static_cast<double>(substeps);
    Vec z = std::move(z0);
    for (std::size_t s = 0; s < substeps; ++s) {
        z = rk4_step(f, z, u0 + h * static_cast<double>(s), h);
        if (!all_finite(z)) throw OverflowError("rk4_solve step", s);
    }
    return z;
}

/// Affine channels f_i(y) = A_i y + b_i.
struct LinearVectorField {
    std::vector<Matrix> a;  // d matrices, n x n
    std::vector<Vec> b;     // d offsets, length n

    LinearVectorField() = default;
    LinearVectorField(std::vector<Matrix> mats, std::vector<Vec> offsets) : a(std::move(mats)), b(std::move(offsets)) {
        if (b.empty()) b.assign(a.size(), Vec(a.empty() ? 0 : a.front().rows, 0.0));
        validate();
    }

    static LinearVectorField zeros(std::size_t n, std::size_t d) {
        return LinearVectorField(std::vector<Matrix>(d, Matrix(n, n)), std::vector<Vec>(d, Vec(n, 0.0)));
    }

    std::size_t state_dim() const { return a.empty() ? 0 : a.front().rows; }
    std::size_t channels() const { return a.size(); }
    int max_derivative_depth() const { return 16; }

    void validate() const {
        if (a.empty()) throw ShapeError("linear vector field needs at least one channel");
        if (b.size() != a.size()) throw ShapeError("linear vector field: offset count differs from matrix count");
        const std::size_t n = a.front().rows;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i].rows != n || a[i].cols != n)
                throw ShapeError("linear vector field: channel " + std::to_string(i) + " matrix is not " +
                                 std::to_string(n) + "x" + std::to_string(n));
            if (b[i].size() != n)
                throw ShapeError("linear vector field: channel " + std::to_string(i) + " offset has wrong length");
        }
    }

    /// f(y): d columns of length n, channel-major.
    Vec operator()(std::span<const double> y) const {
        const std::size_t n = state_dim();
        Vec out(n * channels());
        for (std::size_t i = 0; i < channels(); ++i) {
            std::span<double> col(out.data() + i * n, n);
            matvec_into(a[i], y, col);
            for (std::size_t r = 0; r < n; ++r) col[r] += b[i][r];
        }
        return out;
    }
};

/// General field given by an evaluator; derivatives by nested central differences.
struct SmoothVectorField {
    std::size_t n = 0;
    std::size_t d = 0;
    std::function<Vec(std::span<const double>)> eval;  // returns n*d, channel-major
    int max_depth = 4;

    std::size_t state_dim() const { return n; }
    std::size_t channels() const { return d; }
    int max_derivative_depth() const { return max_depth; }
    Vec operator()(std::span<const double> y) const {
        Vec out = eval(y);
        if (out.size() != n * d) throw ShapeError("vector field evaluator returned the wrong size");
        return out;
    }
};

namespace detail {

/// f∘|w|(y)[w] for a general field: D(f∘(k-1)[tail])(y) f_{w0}(y), by central differences.
inline Vec smooth_word_derivative(const SmoothVectorField& f, std::span<const int> word, std::span<const double> y) {
    const std::size_t n = f.n;
    const Vec fy = f(y);
    const std::size_t head = static_cast<std::size_t>(word[0]);
    Vec dir(fy.begin() + static_cast<std::ptrdiff_t>(head * n),
            fy.begin() + static_cast<std::ptrdiff_t>((head + 1) * n));
    if (word.size() == 1) return dir;
    const double eps = 1e-4 * (1.0 + norm2(y));
    Vec yp(y.begin(), y.end()), ym(y.begin(), y.end());
    for (std::size_t i = 0; i < n; ++i) {
        yp[i] += eps * dir[i];
        ym[i] -= eps * dir[i];
    }
    const Vec gp = smooth_word_derivative(f, word.subspan(1), yp);
    const Vec gm = smooth_word_derivative(f, word.subspan(1), ym);
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (gp[i] - gm[i]) / (2.0 * eps);
    return out;
}

}  // namespace detail

/// f∘k(y) for an affine field, exact. Returns d^k columns of length n.
inline Vec vf_derivative(const LinearVectorField& f, int k, std::span<const double> y) {
    const std::size_t n = f.state_dim(), d = f.channels();
    if (y.size() != n) throw ShapeError("vf_derivative: state has wrong dimension");
    if (k < 0 || k > f.max_derivative_depth())
        throw DomainError("vf_derivative: depth " + std::to_string(k) + " not supported");
    if (k == 0) return Vec(y.begin(), y.end());
    Vec cols = f(y);  // level 1
    for (int level = 2; level <= k; ++level) {
        // word (w, j) = A_j * column(w)
        const std::size_t prev = cols.size() / n;
        Vec next(prev * d * n);
        for (std::size_t w = 0; w < prev; ++w)
            for (std::size_t j = 0; j < d; ++j)
                matvec_into(f.a[j], std::span<const double>(cols.data() + w * n, n),
                            std::span<double>(next.data() + (w * d + j) * n, n));
        cols = std::move(next);
    }
    return cols;
}

/// f∘k(y) for a general field via nested central differences with step 1e-4 (1 + |y|).
inline Vec vf_derivative(const SmoothVectorField& f, int k, std::span<const double> y) {
    const std::size_t n = f.n, d = f.d;
    if (y.size() != n) throw ShapeError("vf_derivative: state has wrong dimension");
    if (k < 0 || k > f.max_derivative_depth())
        throw DomainError("vf_derivative: depth " + std::to_string(k) + " not supported");
    if (k == 0) return Vec(y.begin(), y.end());
    std::size_t words = 1;
    for (int i = 0; i < k; ++i) words *= d;
    Vec out(words * n);
    std::vector<int> word(static_cast<std::size_t>(k));
    for (std::size_t idx = 0; idx < words; ++idx) {
        std::size_t rem = idx;
        for (int p = k - 1; p >= 0; --p) {
            word[static_cast<std::size_t>(p)] = static_cast<int>(rem % d);
            rem /= d;
        }
        const Vec col = detail::smooth_word_derivative(f, word, y);
        std::copy(col.begin(), col.end(), out.begin() + static_cast<std::ptrdiff_t>(idx * n));
    }
    return out;
}

namespace detail {

template <class Field>
void check_field_tensor(const Field& f, const TruncatedTensor& t, const char* op) {
    if (static_cast<std::size_t>(t.dim()) != f.channels())
        throw ShapeError(std::string(op) + ": field has " + std::to_string(f.channels()) +
                         " channels but tensor alphabet is " + std::to_string(t.dim()));
    if (t.depth() > f.max_derivative_depth())
        throw DomainError(std::string(op) + ": depth " + std::to_string(t.depth()) + " exceeds field support");
}

/// sum_{k=1..N} f∘k(y) pi_k(t)
template <class Field>
Vec contract(const Field& f, std::span<const double> y, const TruncatedTensor& t) {
    const std::size_t n = f.state_dim();
    Vec out(n, 0.0);
    for (int k = 1; k <= t.depth(); ++k) {
        std::span<const double> lv = t.level(k);
        bool any = false;
        for (double c : lv) any = any || c != 0.0;
        if (!any) continue;
        const Vec cols = vf_derivative(f, k, y);
        for (std::size_t w = 0; w < lv.size(); ++w)
            if (lv[w] != 0.0) axpy(lv[w], std::span<const double>(cols.data() + w * n, n), out);
    }
    return out;
}

}  // namespace detail

/// Taylor(y, f, S) = sum_{k=0..N} f∘k(y) pi_k(S).
template <class Field>
Vec taylor_step(const Field& f, std::span<const double> y, const TruncatedTensor& sig) {
    detail::check_field_tensor(f, sig, "taylor_step");
    if (std::abs(sig.scalar() - 1.0) > 1e-12) throw DomainError("taylor_step: signature scalar part must be 1");
    if (y.size() != f.state_dim()) throw ShapeError("taylor_step: state has wrong dimension");
    Vec out = detail::contract(f, y, sig);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
    return out;
}

/// Autonomous right-hand side of the log-ODE.
using AutonomousField = std::function<Vec(const Vec&)>;

/// Affine log-ODE field F(z) = M z + c for affine channels:
/// M = sum_w L_w A_ik..A_i1 and c = sum_w L_w A_ik..A_i2 b_i1.
struct AffineLogOdeField {
    Matrix m;
    Vec c;
    Vec operator()(const Vec& z) const {
        Vec out = matvec(m, z);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += c[i];
        return out;
    }
};

inline AffineLogOdeField affine_logode_field(const LinearVectorField& f, const TruncatedTensor& logsig) {
    detail::check_field_tensor(f, logsig, "logode_field");
    const std::size_t n = f.state_dim(), d = f.channels();
    AffineLogOdeField out{Matrix(n, n), Vec(n, 0.0)};
    // products per word of the current level, P_w = A_ik..A_i1 and q_w = A_ik..A_i2 b_i1
    std::vector<Matrix> prods(f.a.begin(), f.a.end());
    std::vector<Vec> offs(f.b.begin(), f.b.end());
    for (int k = 1; k <= logsig.depth(); ++k) {
        std::span<const double> lv = logsig.level(k);
        for (std::size_t w = 0; w < lv.size(); ++w) {
            if (lv[w] == 0.0) continue;
            axpy(lv[w], prods[w].data, out.m.data);
            axpy(lv[w], offs[w], out.c);
        }
        if (k == logsig.depth()) break;
        std::vector<Matrix> next_p;
        std::vector<Vec> next_o;
        next_p.reserve(prods.size() * d);
        next_o.reserve(prods.size() * d);
        for (std::size_t w = 0; w < prods.size(); ++w)
            for (std::size_t j = 0; j < d; ++j) {
                next_p.push_back(matmul(f.a[j], prods[w]));
                next_o.push_back(matvec(f.a[j], offs[w]));
            }
        prods = std::move(next_p);
        offs = std::move(next_o);
    }
    return out;
}

/// F(z) = sum_{k>=1} f∘k(z) pi_k(logsig), with the log-signature as a tensor.
inline AutonomousField logode_field(const LinearVectorField& f, const TruncatedTensor& logsig) {
    return affine_logode_field(f, logsig);
}

inline AutonomousField logode_field(const SmoothVectorField& f, const TruncatedTensor& logsig) {
    detail::check_field_tensor(f, logsig, "logode_field");
    return [f, logsig](const Vec& z) { return detail::contract(f, z, logsig); };
}

/// Log-ODE field from Lyndon coordinates.
template <class Field>
AutonomousField logode_field(const Field& f, const LogSignature& logsig, const LyndonBasis& basis) {
    if (logsig.dim != basis.dim() || logsig.depth != basis.depth())
        throw DomainError("logode_field: log-signature depth/dimension does not match the basis");
    return logode_field(f, basis.expand(logsig.coords));
}

/// Solves dz/du = F(z) on [0, 1] from z(0) = y_s and returns z(1).
template <class Field>
Vec logode_step(const Field& f, std::span<const double> y_s, const TruncatedTensor& logsig,
                const OdeSolveConfig& config = {}) {
    if (y_s.size() != f.state_dim()) throw ShapeError("logode_step: state has wrong dimension");
    AutonomousField rhs = logode_field(f, logsig);
    return rk4_solve([&](const Vec& z, double) { return rhs(z); }, Vec(y_s.begin(), y_s.end()), 0.0, 1.0,
                     config.substeps);
}

template <class Field>
Vec logode_step(const Field& f, std::span<const double> y_s, const LogSignature& logsig, const LyndonBasis& basis,
                const OdeSolveConfig& config = {}) {
    if (logsig.dim != basis.dim() || logsig.depth != basis.depth())
        throw DomainError("logode_step: log-signature depth/dimension does not match the basis");
    return logode_step(f, y_s, basis.expand(logsig.coords), config);
}

/// Log-ODE solution at each partition point r_0..r_m, chaining interval endpoints.
template <class Field>
std::vector<Vec> logode_solve(const Field& f, std::span<const double> y0, const PiecewiseLinearPath& path,
                              std::span<const double> partition, int depth, const OdeSolveConfig& config = {}) {
    if (static_cast<std::size_t>(path.channels()) != f.channels())
        throw ShapeError("logode_solve: path has " + std::to_string(path.channels()) + " channels, field has " +
                         std::to_string(f.channels()));
    validate_partition(path, partition);
    std::vector<Vec> traj;
    traj.reserve(partition.size());
    traj.emplace_back(y0.begin(), y0.end());
    for (std::size_t i = 0; i + 1 < partition.size(); ++i) {
        TruncatedTensor logsig = tensor_log(path_signature(path, partition[i], partition[i + 1], depth));
        try {
            traj.push_back(logode_step(f, traj.back(), logsig, config));
        } catch (const OverflowError&) {
            throw OverflowError("logode_solve interval", i);
        }
    }
    return traj;
}

/// Terminal value of the increment-only (depth-1) log-ODE on a fine mesh: the
/// union of the path's knots and a uniform grid of `fine_substeps` cells. Each
/// cell is a single linear piece, so the only error is RK4's.
template <class Field>
Vec linear_cde_reference(const Field& f, std::span<const double> y0, const PiecewiseLinearPath& path,
                         std::size_t fine_substeps = std::size_t{1} << 14, std::size_t rk4_substeps = 2) {
    std::vector<double> grid;
    grid.reserve(fine_substeps + path.num_points());
    const double a = path.start(), b = path.end();
    std::size_t knot = 0;
    const std::vector<double>& t = path.times();
    for (std::size_t j = 0; j <= fine_substeps; ++j) {
        const double u = (j == fine_substeps) ? b : a + (b - a) * static_cast<double>(j) / fine_substeps;
        while (knot < t.size() && t[knot] < u) {
            if (grid.empty() || t[knot] > grid.back()) grid.push_back(t[knot]);
            ++knot;
        }
        if (grid.empty() || u > grid.back()) grid.push_back(u);
    }
    Vec z(y0.begin(), y0.end());
    const std::size_t v = static_cast<std::size_t>(path.channels());
    TruncatedTensor inc(TensorShape(static_cast<int>(v), 1));
    std::vector<double> left = path.at(grid.front());
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        std::vector<double> right = path.at(grid[i + 1]);
        for (std::size_t c = 0; c < v; ++c) inc.level(1)[c] = right[c] - left[c];
        z = logode_step(f, z, inc, OdeSolveConfig{rk4_substeps});
        left = std::move(right);
    }
    return z;
}

}  // namespace nrde
