#pragma once

// Neural RDE: Z_{r_0} = xi(t_0, x_0), then on each interval [r_i, r_{i+1}]
//   dZ/dt = f(Z) . logsig_i / (r_{i+1} - r_i)
// with f an MLP reshaped to w x p, integrated by fixed-step RK4, and outputs
// Y = readout(Z). Gradients come either from a reverse sweep over the
// recorded solver steps or from the continuous adjoint solved backward on
// each interval from checkpoints at every r_i.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nrde/autodiff.hpp"
#include "nrde/cde_solver.hpp"
#include "nrde/errors.hpp"
#include "nrde/linalg.hpp"
#include "nrde/lyndon.hpp"
#include "nrde/mlp.hpp"
#include "nrde/signature.hpp"

namespace nrde {

enum class OutputMode { Final, AllTimes };
enum class LossKind { CrossEntropy, SquaredError };

struct NrdeConfig {
    std::size_t input_channels = 2;  // v, time included
    std::size_t hidden = 8;          // w
    std::size_t field_width = 16;    // hidden width of the field network
    std::size_t field_layers = 2;    // hidden layers of the field network
    std::size_t init_width = 0;      // hidden width of xi; 0 means xi is affine
    std::size_t outputs = 2;         // q
    int depth = 1;                   // N
    std::size_t step = 1;            // s, partition step in samples
    std::size_t substeps = 1;        // RK4 steps per interval
    OutputMode output_mode = OutputMode::Final;
};

class NrdeModel {
public:
    NrdeModel() = default;
    explicit NrdeModel(const NrdeConfig& cfg) : cfg_(cfg) {
        if (cfg.depth < 1) throw DomainError("model depth must be >= 1");
        if (cfg.input_channels < 1 || cfg.hidden < 1 || cfg.outputs < 1 || cfg.field_layers < 1 || cfg.substeps < 1)
            throw ShapeError("model widths, layer count and substeps must be positive");
        logsig_dim_ = static_cast<std::size_t>(nrde::logsig_dim(static_cast<int>(cfg.input_channels), cfg.depth));
        std::vector<std::size_t> init_w{cfg.input_channels};
        if (cfg.init_width > 0) init_w.push_back(cfg.init_width);
        init_w.push_back(cfg.hidden);
        initial_ = Mlp(init_w);
        std::vector<std::size_t> field_w{cfg.hidden};
        for (std::size_t l = 0; l < cfg.field_layers; ++l) field_w.push_back(cfg.field_width);
        field_w.push_back(cfg.hidden * logsig_dim_);
        field_ = Mlp(field_w);
        readout_ = Mlp({cfg.hidden, cfg.outputs});
    }

    template <class Rng>
    void init(Rng& rng) {
        initial_.init_uniform(rng);
        field_.init_uniform(rng);
        readout_.init_uniform(rng);
    }
    void init_seeded(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        init(rng);
    }

    const NrdeConfig& config() const noexcept { return cfg_; }
    NrdeConfig& mutable_config() noexcept { return cfg_; }
    std::size_t hidden() const noexcept { return cfg_.hidden; }
    std::size_t logsig_dim() const noexcept { return logsig_dim_; }
    std::size_t outputs() const noexcept { return cfg_.outputs; }
    const Mlp& initial_net() const noexcept { return initial_; }
    const Mlp& field_net() const noexcept { return field_; }
    const Mlp& readout() const noexcept { return readout_; }
    Mlp& initial_net() noexcept { return initial_; }
    Mlp& field_net() noexcept { return field_; }
    Mlp& readout() noexcept { return readout_; }

    std::size_t num_params() const { return initial_.num_params() + field_.num_params() + readout_.num_params(); }
    std::size_t field_offset() const { return initial_.num_params(); }
    std::size_t readout_offset() const { return initial_.num_params() + field_.num_params(); }

    /// Flat parameters: initial net, field net, readout; per layer weight then bias.
    std::vector<double> parameters() const {
        std::vector<double> p;
        p.reserve(num_params());
        initial_.get_params(p);
        field_.get_params(p);
        readout_.get_params(p);
        return p;
    }
    void set_parameters(std::span<const double> flat) {
        if (flat.size() != num_params())
            throw ShapeError("parameter vector has " + std::to_string(flat.size()) + " entries, model has " +
                             std::to_string(num_params()));
        std::size_t off = initial_.set_params(flat, 0);
        off = field_.set_params(flat, off);
        readout_.set_params(flat, off);
    }

    /// f(Z) . coords / width.
    Vec field(std::span<const double> z, std::span<const double> coords, double width) const {
        if (coords.size() != logsig_dim_)
            throw ShapeError("log-signature has " + std::to_string(coords.size()) + " coordinates, model expects " +
                             std::to_string(logsig_dim_));
        if (!(width > 0.0)) throw DomainError("interval width must be positive");
        const Vec f = field_.forward(z);
        const std::size_t w = cfg_.hidden, p = logsig_dim_;
        Vec out(w, 0.0);
        for (std::size_t i = 0; i < w; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j) s += f[i * p + j] * coords[j];
            out[i] = s / width;
        }
        return out;
    }

    void check_stream(const LogSignatureStream& stream) const {
        if (stream.num_intervals() == 0) throw DomainError("empty log-signature stream");
        if (stream.coord_dim() != logsig_dim_ || stream.depth != cfg_.depth ||
            static_cast<std::size_t>(stream.dim) != cfg_.input_channels)
            throw ShapeError("stream (d=" + std::to_string(stream.dim) + ", N=" + std::to_string(stream.depth) +
                             ") does not match model (d=" + std::to_string(cfg_.input_channels) +
                             ", N=" + std::to_string(cfg_.depth) + ")");
    }

private:
    NrdeConfig cfg_;
    std::size_t logsig_dim_ = 0;
    Mlp initial_;
    Mlp field_;
    Mlp readout_;
};

struct ForwardResult {
    std::vector<Vec> hidden;   // Z at r_0..r_m
    std::vector<Vec> outputs;  // Y at the requested times (final only, or every r_i)
};

/// Integrates the hidden state across a stream. `x0` is the embedded first observation (t_0, x_0).
inline ForwardResult nrde_forward(const NrdeModel& model, const LogSignatureStream& stream,
                                  std::span<const double> x0) {
    model.check_stream(stream);
    ForwardResult r;
    Vec z = model.initial_net().forward(x0);
    r.hidden.reserve(stream.num_intervals() + 1);
    r.hidden.push_back(z);
    const std::size_t sub = model.config().substeps;
    for (std::size_t i = 0; i < stream.num_intervals(); ++i) {
        const double width = stream.width(i);
        const std::vector<double>& coords = stream.coords[i];
        auto g = [&](const Vec& state, double) { return model.field(state, coords, width); };
        const double h = width / static_cast<double>(sub);
        for (std::size_t s = 0; s < sub; ++s) z = rk4_step(g, z, 0.0, h);
        if (!all_finite(z)) throw OverflowError("nrde_forward interval", i);
        r.hidden.push_back(z);
    }
    if (model.config().output_mode == OutputMode::Final) {
        r.outputs.push_back(model.readout().forward(r.hidden.back()));
    } else {
        for (const Vec& h : r.hidden) r.outputs.push_back(model.readout().forward(h));
    }
    return r;
}

/// Neural CDE driven by the linear interpolation of the raw samples:
/// dZ/dt = f(Z) dX/dt with dX/dt constant on each sample segment. Independent
/// of the log-signature pipeline; requires a depth-1 model.
inline ForwardResult ncde_forward(const NrdeModel& model, const PiecewiseLinearPath& path) {
    if (model.logsig_dim() != static_cast<std::size_t>(path.channels()))
        throw ShapeError("ncde_forward needs a model whose field has one column per path channel");
    ForwardResult r;
    Vec z = model.initial_net().forward(path.point(0));
    r.hidden.push_back(z);
    const std::size_t w = model.hidden(), v = static_cast<std::size_t>(path.channels());
    const std::size_t sub = model.config().substeps;
    Vec deriv(v);
    for (std::size_t i = 0; i < path.num_segments(); ++i) {
        const double t0 = path.times()[i], t1 = path.times()[i + 1];
        const double dt = t1 - t0;
        deriv[0] = 1.0;
        for (std::size_t c = 1; c < v; ++c) deriv[c] = (path.row(i + 1)[c - 1] - path.row(i)[c - 1]) / dt;
        auto g = [&](const Vec& state, double) {
            const Vec f = model.field_net().forward(state);
            Vec out(w, 0.0);
            for (std::size_t a = 0; a < w; ++a)
                for (std::size_t c = 0; c < v; ++c) out[a] += f[a * v + c] * deriv[c];
            return out;
        };
        const double h = dt / static_cast<double>(sub);
        for (std::size_t s = 0; s < sub; ++s) z = rk4_step(g, z, t0 + h * static_cast<double>(s), h);
        if (!all_finite(z)) throw OverflowError("ncde_forward segment", i);
        r.hidden.push_back(z);
    }
    if (model.config().output_mode == OutputMode::Final) {
        r.outputs.push_back(model.readout().forward(r.hidden.back()));
    } else {
        for (const Vec& h : r.hidden) r.outputs.push_back(model.readout().forward(h));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Losses

struct Target {
    int label = -1;  // class index for cross-entropy
    Vec values;      // regression targets: q entries, or one q-block per output time
};

struct LossValue {
    double loss = 0.0;
    std::vector<Vec> grad;  // d loss / d Y, one entry per output
};

inline LossValue cross_entropy(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw DomainError("label " + std::to_string(label) + " outside 0.." + std::to_string(logits.size() - 1));
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    const double lse = mx + std::log(sum);
    LossValue out;
    out.loss = lse - logits[static_cast<std::size_t>(label)];
    Vec g(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) g[i] = std::exp(logits[i] - lse);
    g[static_cast<std::size_t>(label)] -= 1.0;
    out.grad.push_back(std::move(g));
    return out;
}

/// Cross-entropy uses the final output; squared error is the mean over every output entry.
inline LossValue loss(const std::vector<Vec>& outputs, const Target& target, LossKind kind) {
    if (outputs.empty()) throw ShapeError("loss: no outputs");
    if (kind == LossKind::CrossEntropy) {
        LossValue lv = cross_entropy(outputs.back(), target.label);
        std::vector<Vec> grads(outputs.size());
        for (std::size_t i = 0; i + 1 < outputs.size(); ++i) grads[i].assign(outputs[i].size(), 0.0);
        grads.back() = std::move(lv.grad.front());
        lv.grad = std::move(grads);
        return lv;
    }
    std::size_t total = 0;
    for (const Vec& y : outputs) total += y.size();
    if (target.values.size() != total)
        throw ShapeError("loss: target has " + std::to_string(target.values.size()) + " entries, outputs have " +
                         std::to_string(total));
    LossValue lv;
    std::size_t k = 0;
    for (const Vec& y : outputs) {
        Vec g(y.size());
        for (std::size_t i = 0; i < y.size(); ++i, ++k) {
            const double diff = y[i] - target.values[k];
            lv.loss += diff * diff;
            g[i] = 2.0 * diff / static_cast<double>(total);
        }
        lv.grad.push_back(std::move(g));
    }
    lv.loss /= static_cast<double>(total);
    return lv;
}

inline std::size_t argmax(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// ---------------------------------------------------------------------------
// Gradients

struct Sample {
    LogSignatureStream stream;
    Vec x0;  // embedded first observation
    Target target;
};

struct GradResult {
    double loss = 0.0;
    Vec grad;                          // flat, model.parameters() order
    std::size_t peak_live_values = 0;  // recorded doubles plus solver checkpoints
};

/// Exact reverse-mode gradient of the discretised forward pass.
inline GradResult backprop_through_solver(const NrdeModel& model, const Sample& sample, LossKind kind,
                                          ad::Tape& tape) {
    model.check_stream(sample.stream);
    tape.clear();
    tape.reset_peak();
    const Mlp::TapeParams ip = model.initial_net().record_params(tape);
    const Mlp::TapeParams fp = model.field_net().record_params(tape);
    const Mlp::TapeParams rp = model.readout().record_params(tape);
    const ad::Var x0 = tape.leaf(sample.x0);
    ad::Var z = model.initial_net().forward(tape, ip, x0);
    const std::size_t w = model.hidden();
    const std::size_t sub = model.config().substeps;
    const bool all_times = model.config().output_mode == OutputMode::AllTimes;
    std::vector<ad::Var> outs;
    if (all_times) outs.push_back(model.readout().forward(tape, rp, z));
    Vec c(model.logsig_dim());
    for (std::size_t i = 0; i < sample.stream.num_intervals(); ++i) {
        const double width = sample.stream.width(i);
        const std::vector<double>& coords = sample.stream.coords[i];
        for (std::size_t j = 0; j < c.size(); ++j) c[j] = coords[j];
        const double h = width / static_cast<double>(sub);
        auto g = [&](ad::Var state) {
            return tape.matvec_const(model.field_net().forward(tape, fp, state), c, w, 1.0 / width);
        };
        for (std::size_t s = 0; s < sub; ++s) {
            const ad::Var k1 = g(z);
            const ad::Var k2 = g(tape.axpy(z, 0.5 * h, k1));
            const ad::Var k3 = g(tape.axpy(z, 0.5 * h, k2));
            const ad::Var k4 = g(tape.axpy(z, h, k3));
            const ad::Var terms[5] = {z, k1, k2, k3, k4};
            const double coefs[5] = {1.0, h / 6.0, h / 3.0, h / 3.0, h / 6.0};
            z = tape.lincomb(terms, coefs);
        }
        if (!all_finite(tape.value(z))) throw OverflowError("nrde_forward interval", i);
        if (all_times) outs.push_back(model.readout().forward(tape, rp, z));
    }
    if (!all_times) outs.push_back(model.readout().forward(tape, rp, z));

    std::vector<Vec> ys;
    for (ad::Var o : outs) {
        std::span<const double> y = tape.value(o);
        ys.emplace_back(y.begin(), y.end());
    }
    const LossValue lv = loss(ys, sample.target, kind);
    for (std::size_t k = 0; k < outs.size(); ++k) tape.seed(outs[k], lv.grad[k]);
    tape.backward();

    GradResult out;
    out.loss = lv.loss;
    out.grad.assign(model.num_params(), 0.0);
    Mlp::collect_grads(tape, ip, out.grad, 0);
    Mlp::collect_grads(tape, fp, out.grad, model.field_offset());
    Mlp::collect_grads(tape, rp, out.grad, model.readout_offset());
    out.peak_live_values = tape.peak_live_values();
    return out;
}

inline GradResult backprop_through_solver(const NrdeModel& model, const Sample& sample, LossKind kind) {
    ad::Tape tape;
    return backprop_through_solver(model, sample, kind, tape);
}

/// Continuous-adjoint gradient. The forward pass keeps only Z(r_i); each
/// interval is then solved backward for (Z, a, dL/dtheta_field) with
/// `substeps` RK4 steps, restarting Z from its checkpoint.
inline GradResult adjoint_backward(const NrdeModel& model, const Sample& sample, LossKind kind,
                                   std::size_t substeps) {
    if (substeps < 1) throw DomainError("adjoint_backward needs substeps >= 1");
    NrdeModel fwd_model = model;
    fwd_model.mutable_config().substeps = substeps;
    const ForwardResult fwd = nrde_forward(fwd_model, sample.stream, sample.x0);
    const LossValue lv = loss(fwd.outputs, sample.target, kind);

    const std::size_t w = model.hidden();
    const std::size_t m = sample.stream.num_intervals();
    const std::size_t pf = model.field_net().num_params();
    const bool all_times = model.config().output_mode == OutputMode::AllTimes;

    GradResult out;
    out.loss = lv.loss;
    out.grad.assign(model.num_params(), 0.0);
    ad::Tape tape;
    std::size_t tape_peak = 0;

    // readout: dL/dY -> readout params and dL/dZ at the output times
    auto readout_vjp = [&](const Vec& z, const Vec& gy) {
        tape.clear();
        const Mlp::TapeParams rp = model.readout().record_params(tape);
        const ad::Var zv = tape.leaf(z);
        const ad::Var y = model.readout().forward(tape, rp, zv);
        tape.seed(y, gy);
        tape.backward();
        Mlp::collect_grads(tape, rp, out.grad, model.readout_offset());
        tape_peak = std::max(tape_peak, tape.peak_live_values());
        std::span<const double> gz = tape.grad(zv);
        return Vec(gz.begin(), gz.end());
    };

    Vec a(w, 0.0);
    if (all_times) {
        a = readout_vjp(fwd.hidden[m], lv.grad[m]);
    } else {
        a = readout_vjp(fwd.hidden[m], lv.grad[0]);
    }

    // augmented state layout: [z (w) | a (w) | g_field (pf)]
    const std::size_t aug_n = 2 * w + pf;
    Vec c(model.logsig_dim());
    double inv_width = 1.0;
    auto aug_rhs = [&](const Vec& s, double) {
        tape.clear();
        const Mlp::TapeParams fp = model.field_net().record_params(tape);
        const ad::Var zv = tape.leaf(std::span<const double>(s.data(), w));
        const ad::Var g = tape.matvec_const(model.field_net().forward(tape, fp, zv), c, w, inv_width);
        tape.seed(g, std::span<const double>(s.data() + w, w));
        tape.backward();
        tape_peak = std::max(tape_peak, tape.peak_live_values());
        Vec ds(aug_n, 0.0);
        std::span<const double> gv = tape.value(g);
        std::span<const double> gz = tape.grad(zv);
        for (std::size_t i = 0; i < w; ++i) {
            ds[i] = -gv[i];
            ds[w + i] = gz[i];
        }
        Mlp::collect_grads(tape, fp, ds, 2 * w);
        return ds;
    };

    Vec field_grad(pf, 0.0);
    for (std::size_t i = m; i-- > 0;) {
        const double width = sample.stream.width(i);
        inv_width = 1.0 / width;
        for (std::size_t j = 0; j < c.size(); ++j) c[j] = sample.stream.coords[i][j];
        Vec s(aug_n, 0.0);
        std::copy(fwd.hidden[i + 1].begin(), fwd.hidden[i + 1].end(), s.begin());
        std::copy(a.begin(), a.end(), s.begin() + static_cast<std::ptrdiff_t>(w));
        const double h = width / static_cast<double>(substeps);
        for (std::size_t k = 0; k < substeps; ++k) s = rk4_step(aug_rhs, s, 0.0, h);
        if (!all_finite(s)) throw OverflowError("adjoint_backward interval", i);
        for (std::size_t j = 0; j < w; ++j) a[j] = s[w + j];
        for (std::size_t j = 0; j < pf; ++j) field_grad[j] += s[2 * w + j];
        if (all_times) {
            const Vec extra = readout_vjp(fwd.hidden[i], lv.grad[i]);
            for (std::size_t j = 0; j < w; ++j) a[j] += extra[j];
        }
    }
    for (std::size_t j = 0; j < pf; ++j) out.grad[model.field_offset() + j] += field_grad[j];

    // initial network
    tape.clear();
    const Mlp::TapeParams ip = model.initial_net().record_params(tape);
    const ad::Var x0 = tape.leaf(sample.x0);
    const ad::Var z0 = model.initial_net().forward(tape, ip, x0);
    tape.seed(z0, a);
    tape.backward();
    Mlp::collect_grads(tape, ip, out.grad, 0);
    tape_peak = std::max(tape_peak, tape.peak_live_values());

    // checkpoints + RK4 stage buffers (state, 4 slopes, scratch) + largest tape
    out.peak_live_values = (m + 1) * w + 6 * aug_n + tape_peak;
    return out;
}

}  // namespace nrde
