#pragma once

// Vector-level reverse-mode differentiation.
//
// Each node of the tape holds a dense block of values. Nodes are appended in
// evaluation order, so a single reverse sweep over the node list visits every
// recorded operation exactly once, after all of its consumers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nrde/errors.hpp"

namespace nrde::ad {

struct Var {
    std::uint32_t id = UINT32_MAX;
    bool valid() const noexcept { return id != UINT32_MAX; }
};

class Tape {
public:
    enum class Op : std::uint8_t { Leaf, Linear, Relu, Tanh, LinComb, MatVecConst };

    /// New leaf (parameter or input) holding a copy of `values`.
    Var leaf(std::span<const double> values) {
        Var v = push(Op::Leaf, values.size());
        std::copy(values.begin(), values.end(), vals_.begin() + static_cast<std::ptrdiff_t>(nodes_[v.id].off));
        return v;
    }

    /// y = W x + b, with W (rows x cols, row-major) and b as tape variables.
    Var linear(Var w, Var b, Var x, std::size_t rows, std::size_t cols) {
        if (size(w) != rows * cols || size(b) != rows || size(x) != cols)
            throw ShapeError("tape linear: operand sizes do not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
        Var y = push(Op::Linear, rows);
        Node& n = nodes_[y.id];
        n.a = w.id;
        n.b = b.id;
        n.c = x.id;
        n.rows = static_cast<std::uint32_t>(rows);
        n.cols = static_cast<std::uint32_t>(cols);
        const double* wv = value_ptr(w);
        const double* bv = value_ptr(b);
        const double* xv = value_ptr(x);
        double* yv = vals_.data() + n.off;
        for (std::size_t i = 0; i < rows; ++i) {
            double s = bv[i];
            const double* row = wv + i * cols;
            for (std::size_t j = 0; j < cols; ++j) s += row[j] * xv[j];
            yv[i] = s;
        }
        return y;
    }

    Var relu(Var x) { return unary(Op::Relu, x, [](double v) { return v > 0.0 ? v : 0.0; }); }
    Var tanh(Var x) { return unary(Op::Tanh, x, [](double v) { return std::tanh(v); }); }

    /// sum_j coef_j * x_j over equally sized operands.
    Var lincomb(std::span<const Var> xs, std::span<const double> coefs) {
        if (xs.empty() || xs.size() != coefs.size()) throw ShapeError("tape lincomb: bad operand list");
        const std::size_t len = size(xs[0]);
        for (Var x : xs)
            if (size(x) != len) throw ShapeError("tape lincomb: operand sizes differ");
        Var y = push(Op::LinComb, len);
        Node& n = nodes_[y.id];
        n.a = static_cast<std::uint32_t>(terms_.size());
        n.b = static_cast<std::uint32_t>(xs.size());
        for (std::size_t j = 0; j < xs.size(); ++j) terms_.push_back({xs[j].id, coefs[j]});
        double* yv = vals_.data() + n.off;
        for (std::size_t j = 0; j < xs.size(); ++j) {
            const double* xv = value_ptr(xs[j]);
            const double c = coefs[j];
            for (std::size_t i = 0; i < len; ++i) yv[i] += c * xv[i];
        }
        return y;
    }

    Var add(Var x, Var y) {
        const Var xs[2] = {x, y};
        const double cs[2] = {1.0, 1.0};
        return lincomb(xs, cs);
    }
    Var axpy(Var x, double alpha, Var y) {  // x + alpha y
        const Var xs[2] = {x, y};
        const double cs[2] = {1.0, alpha};
        return lincomb(xs, cs);
    }

    /// y = scale * M c where M is x viewed as rows x cols (row-major) and c is constant.
    Var matvec_const(Var x, std::span<const double> c, std::size_t rows, double scale = 1.0) {
        const std::size_t cols = c.size();
        if (size(x) != rows * cols) throw ShapeError("tape matvec_const: operand is not rows x cols");
        Var y = push(Op::MatVecConst, rows);
        Node& n = nodes_[y.id];
        n.a = x.id;
        n.b = static_cast<std::uint32_t>(consts_.size());
        n.rows = static_cast<std::uint32_t>(rows);
        n.cols = static_cast<std::uint32_t>(cols);
        n.scale = scale;
        consts_.insert(consts_.end(), c.begin(), c.end());
        const double* xv = value_ptr(x);
        double* yv = vals_.data() + n.off;
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) s += xv[i * cols + j] * c[j];
            yv[i] = scale * s;
        }
        return y;
    }

    std::span<const double> value(Var v) const {
        const Node& n = nodes_.at(v.id);
        return {vals_.data() + n.off, n.size};
    }
    std::size_t size(Var v) const { return nodes_.at(v.id).size; }

    /// Gradient buffer of a node. Allocated (zeroed) on first access after recording.
    std::span<double> grad(Var v) {
        ensure_grads();
        const Node& n = nodes_.at(v.id);
        return {grads_.data() + n.off, n.size};
    }

    /// Adds `seed` into d(output)/d(v), e.g. a loss gradient.
    void seed(Var v, std::span<const double> seed_values) {
        std::span<double> g = grad(v);
        if (g.size() != seed_values.size()) throw ShapeError("tape seed: size mismatch");
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed_values[i];
    }

    /// Reverse sweep over every node, last to first.
    void backward() {
        ensure_grads();
        last_visits_ = 0;
        for (std::size_t k = nodes_.size(); k-- > 0;) {
            backward_node(nodes_[k]);
            ++last_visits_;
        }
        ++sweeps_;
    }

    /// Drops all nodes; keeps allocated capacity.
    void clear() {
        nodes_.clear();
        vals_.clear();
        grads_.clear();
        terms_.clear();
        consts_.clear();
    }

    std::size_t num_nodes() const noexcept { return nodes_.size(); }
    /// Doubles currently recorded (values plus constants).
    std::size_t live_values() const noexcept { return vals_.size() + consts_.size(); }
    std::size_t peak_live_values() const noexcept { return peak_; }
    void reset_peak() noexcept { peak_ = live_values(); }
    std::size_t sweeps() const noexcept { return sweeps_; }
    std::size_t last_sweep_visits() const noexcept { return last_visits_; }

private:
    struct Node {
        Op op = Op::Leaf;
        std::uint32_t a = 0, b = 0, c = 0;
        std::uint32_t rows = 0, cols = 0;
        std::size_t off = 0;
        std::size_t size = 0;
        double scale = 1.0;
    };
    struct Term {
        std::uint32_t id;
        double coef;
    };

    Var push(Op op, std::size_t len) {
        if (nodes_.size() >= UINT32_MAX - 1) throw ShapeError("tape is full");
        Node n;
        n.op = op;
        n.off = vals_.size();
        n.size = len;
        vals_.resize(vals_.size() + len, 0.0);
        if (!grads_.empty()) grads_.resize(vals_.size(), 0.0);
        nodes_.push_back(n);
        peak_ = std::max(peak_, live_values());
        return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    template <class F>
    Var unary(Op op, Var x, F f) {
        const std::size_t len = size(x);
        Var y = push(op, len);
        nodes_[y.id].a = x.id;
        const double* xv = value_ptr(x);
        double* yv = vals_.data() + nodes_[y.id].off;
        for (std::size_t i = 0; i < len; ++i) yv[i] = f(xv[i]);
        return y;
    }

    const double* value_ptr(Var v) const { return vals_.data() + nodes_.at(v.id).off; }

    void ensure_grads() {
        if (grads_.size() != vals_.size()) grads_.resize(vals_.size(), 0.0);
    }

    void backward_node(const Node& n) {
        const double* gy = grads_.data() + n.off;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Linear: {
                const Node& w = nodes_[n.a];
                const Node& b = nodes_[n.b];
                const Node& x = nodes_[n.c];
                const double* wv = vals_.data() + w.off;
                const double* xv = vals_.data() + x.off;
                double* gw = grads_.data() + w.off;
                double* gb = grads_.data() + b.off;
                double* gx = grads_.data() + x.off;
                for (std::size_t i = 0; i < n.rows; ++i) {
                    const double g = gy[i];
                    if (g == 0.0) continue;
                    gb[i] += g;
                    const double* row = wv + i * n.cols;
                    double* grow = gw + i * n.cols;
                    for (std::size_t j = 0; j < n.cols; ++j) {
                        grow[j] += g * xv[j];
                        gx[j] += g * row[j];
                    }
                }
                break;
            }
            case Op::Relu: {
                const Node& x = nodes_[n.a];
                const double* xv = vals_.data() + x.off;
                double* gx = grads_.data() + x.off;
                for (std::size_t i = 0; i < n.size; ++i)
                    if (xv[i] > 0.0) gx[i] += gy[i];
                break;
            }
            case Op::Tanh: {
                const Node& x = nodes_[n.a];
                const double* yv = vals_.data() + n.off;
                double* gx = grads_.data() + x.off;
                for (std::size_t i = 0; i < n.size; ++i) gx[i] += gy[i] * (1.0 - yv[i] * yv[i]);
                break;
            }
            case Op::LinComb: {
                for (std::uint32_t t = 0; t < n.b; ++t) {
                    const Term& term = terms_[n.a + t];
                    double* gx = grads_.data() + nodes_[term.id].off;
                    for (std::size_t i = 0; i < n.size; ++i) gx[i] += term.coef * gy[i];
                }
                break;
            }
            case Op::MatVecConst: {
                const Node& x = nodes_[n.a];
                const double* c = consts_.data() + n.b;
                double* gx = grads_.data() + x.off;
                for (std::size_t i = 0; i < n.rows; ++i) {
                    const double g = n.scale * gy[i];
                    if (g == 0.0) continue;
                    for (std::size_t j = 0; j < n.cols; ++j) gx[i * n.cols + j] += g * c[j];
                }
                break;
            }
        }
    }

    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<double> grads_;
    std::vector<Term> terms_;
    std::vector<double> consts_;
    std::size_t peak_ = 0;
    std::size_t sweeps_ = 0;
    std::size_t last_visits_ = 0;
};

}  // namespace nrde::ad
