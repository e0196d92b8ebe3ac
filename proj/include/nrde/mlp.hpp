#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nrde/autodiff.hpp"
#include "nrde/errors.hpp"
#include "nrde/linalg.hpp"

namespace nrde {

/// Fully connected network. Widths {in, h1, ..., hL, out}: rectifier after
/// h1..h_{L-1}, tanh after the final hidden layer hL, linear output. Two
/// widths give a plain affine map.
class Mlp {
public:
    struct Layer {
        Matrix weight;  // out x in
        Vec bias;
    };

    /// Parameter leaves of one recorded forward pass.
    struct TapeParams {
        std::vector<ad::Var> weights;
        std::vector<ad::Var> biases;
    };

    Mlp() = default;
    explicit Mlp(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
        if (widths_.size() < 2) throw ShapeError("an MLP needs at least input and output widths");
        for (std::size_t w : widths_)
            if (w == 0) throw ShapeError("MLP widths must be positive");
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
            layers_.push_back({Matrix(widths_[l + 1], widths_[l]), Vec(widths_[l + 1], 0.0)});
    }

    /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    template <class Rng>
    void init_uniform(Rng& rng) {
        for (Layer& layer : layers_) {
            const double lim = std::sqrt(6.0 / static_cast<double>(layer.weight.rows + layer.weight.cols));
            std::uniform_real_distribution<double> dist(-lim, lim);
            for (double& w : layer.weight.data) w = dist(rng);
            std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
        }
    }

    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    std::size_t input_dim() const { return widths_.front(); }
    std::size_t output_dim() const { return widths_.back(); }
    std::size_t num_layers() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return layers_.at(i); }
    Layer& layer(std::size_t i) { return layers_.at(i); }
    bool has_hidden() const { return layers_.size() > 1; }

    std::size_t num_params() const {
        std::size_t n = 0;
        for (const Layer& l : layers_) n += l.weight.data.size() + l.bias.size();
        return n;
    }

    /// Appends parameters (per layer: weight row-major, then bias).
    void get_params(std::vector<double>& out) const {
        for (const Layer& l : layers_) {
            out.insert(out.end(), l.weight.data.begin(), l.weight.data.end());
            out.insert(out.end(), l.bias.begin(), l.bias.end());
        }
    }
    /// Reads parameters starting at `offset`; returns the offset past them.
    std::size_t set_params(std::span<const double> flat, std::size_t offset) {
        for (Layer& l : layers_) {
            if (offset + l.weight.data.size() + l.bias.size() > flat.size())
                throw ShapeError("parameter vector too short for MLP");
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), l.weight.data.size(), l.weight.data.begin());
            offset += l.weight.data.size();
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), l.bias.size(), l.bias.begin());
            offset += l.bias.size();
        }
        return offset;
    }

    Vec forward(std::span<const double> x) const {
        check_input(x.size());
        Vec h(x.begin(), x.end());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            Vec next = matvec(layers_[l].weight, h);
            for (std::size_t i = 0; i < next.size(); ++i) next[i] += layers_[l].bias[i];
            if (l + 1 < layers_.size()) activate(next, l);
            h = std::move(next);
        }
        return h;
    }

    /// Post-activation of the final hidden layer (tanh range). Requires a hidden layer.
    Vec last_hidden(std::span<const double> x) const {
        check_input(x.size());
        if (!has_hidden()) throw ShapeError("MLP has no hidden layer");
        Vec h(x.begin(), x.end());
        for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
            Vec next = matvec(layers_[l].weight, h);
            for (std::size_t i = 0; i < next.size(); ++i) next[i] += layers_[l].bias[i];
            activate(next, l);
            h = std::move(next);
        }
        return h;
    }

    TapeParams record_params(ad::Tape& tape) const {
        TapeParams p;
        for (const Layer& l : layers_) {
            p.weights.push_back(tape.leaf(l.weight.data));
            p.biases.push_back(tape.leaf(l.bias));
        }
        return p;
    }

    ad::Var forward(ad::Tape& tape, const TapeParams& params, ad::Var x) const {
        check_input(tape.size(x));
        ad::Var h = x;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            h = tape.linear(params.weights[l], params.biases[l], h, layers_[l].weight.rows, layers_[l].weight.cols);
            if (l + 1 < layers_.size()) h = (l + 2 == layers_.size()) ? tape.tanh(h) : tape.relu(h);
        }
        return h;
    }

    /// Appends d(loss)/d(params) from a swept tape, in get_params order.
    static void collect_grads(ad::Tape& tape, const TapeParams& params, std::span<double> out, std::size_t offset) {
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            for (ad::Var v : {params.weights[l], params.biases[l]}) {
                std::span<const double> g = tape.grad(v);
                for (std::size_t i = 0; i < g.size(); ++i) out[offset + i] += g[i];
                offset += g.size();
            }
        }
    }

    /// Upper bound on |forward(x)| for every x, from |tanh| < 1 feeding the output layer.
    double output_bound() const {
        if (!has_hidden()) throw ShapeError("output_bound needs a tanh hidden layer");
        const Layer& out = layers_.back();
        double s = 0.0;
        for (std::size_t i = 0; i < out.weight.rows; ++i) {
            double r = std::abs(out.bias[i]);
            for (std::size_t j = 0; j < out.weight.cols; ++j) r += std::abs(out.weight(i, j));
            s += r * r;
        }
        return std::sqrt(s);
    }

private:
    void check_input(std::size_t n) const {
        if (n != input_dim())
            throw ShapeError("MLP input width " + std::to_string(n) + " but network expects " +
                             std::to_string(input_dim()));
    }
    void activate(Vec& v, std::size_t layer_index) const {
        const bool last_hidden_layer = layer_index + 2 == layers_.size();
        for (double& x : v) x = last_hidden_layer ? std::tanh(x) : (x > 0.0 ? x : 0.0);
    }

    std::vector<std::size_t> widths_;
    std::vector<Layer> layers_;
};

}  // namespace nrde
