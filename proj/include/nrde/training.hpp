#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nrde/autodiff.hpp"
#include "nrde/errors.hpp"
#include "nrde/nrde_model.hpp"

namespace nrde {

enum class GradientMode { Backprop, Adjoint };

struct TrainConfig {
    std::size_t batch_size = 32;
    double base_lr = 0.032;  // learning rate = base_lr / batch_size
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t plateau_patience = 15;  // epochs without val improvement before lr /= 10
    std::size_t stop_patience = 60;     // epochs without val improvement before stopping
    double lr_decay = 10.0;
    std::size_t max_epochs = 200;
    std::uint64_t seed = 0;
    LossKind loss = LossKind::CrossEntropy;
    GradientMode gradient = GradientMode::Backprop;
    std::size_t adjoint_substeps = 0;  // 0: use the model's substeps

    double initial_lr() const { return base_lr / static_cast<double>(batch_size); }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    double wall_clock_s = 0.0;
    std::size_t peak_live_values = 0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<double> best_params;
    bool early_stopped = false;
};

class Adam {
public:
    Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> params, std::span<const double> grad) {
        if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("Adam: size mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }

    double lr() const noexcept { return lr_; }
    void set_lr(double lr) noexcept { lr_ = lr; }
    std::size_t steps() const noexcept { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

/// Plateau schedule: lr /= decay after `plateau_patience` epochs without a new
/// best validation loss, stop after `stop_patience` such epochs.
class PlateauSchedule {
public:
    PlateauSchedule(std::size_t plateau_patience, std::size_t stop_patience, double decay)
        : plateau_patience_(plateau_patience), stop_patience_(stop_patience), decay_(decay) {}

    enum class Event { Improved, None, Reduced, Stop };

    Event observe(double val_loss, double& lr) {
        if (val_loss < best_) {
            best_ = val_loss;
            since_best_ = 0;
            since_reduce_ = 0;
            return Event::Improved;
        }
        ++since_best_;
        ++since_reduce_;
        if (since_best_ >= stop_patience_) return Event::Stop;
        if (since_reduce_ >= plateau_patience_) {
            lr /= decay_;
            since_reduce_ = 0;
            return Event::Reduced;
        }
        return Event::None;
    }

    double best() const noexcept { return best_; }

private:
    std::size_t plateau_patience_, stop_patience_;
    double decay_;
    double best_ = INFINITY;
    std::size_t since_best_ = 0;
    std::size_t since_reduce_ = 0;
};

struct Evaluation {
    double loss = 0.0;
    double accuracy = 0.0;  // classification only
};

inline Evaluation evaluate(const NrdeModel& model, std::span<const Sample> samples, LossKind kind) {
    if (samples.empty()) throw DomainError("evaluate: empty dataset");
    Evaluation e;
    std::size_t correct = 0;
    for (const Sample& s : samples) {
        const ForwardResult r = nrde_forward(model, s.stream, s.x0);
        e.loss += loss(r.outputs, s.target, kind).loss;
        if (kind == LossKind::CrossEntropy && static_cast<int>(argmax(r.outputs.back())) == s.target.label) ++correct;
    }
    e.loss /= static_cast<double>(samples.size());
    e.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
    return e;
}

/// Mean loss and gradient over a batch; per-sample passes are reduced in order.
inline GradResult batch_gradient(const NrdeModel& model, std::span<const Sample* const> batch,
                                 const TrainConfig& cfg, ad::Tape& tape) {
    GradResult total;
    total.grad.assign(model.num_params(), 0.0);
    const std::size_t adj_sub = cfg.adjoint_substeps ? cfg.adjoint_substeps : model.config().substeps;
    for (const Sample* s : batch) {
        GradResult g = cfg.gradient == GradientMode::Backprop
                           ? backprop_through_solver(model, *s, cfg.loss, tape)
                           : adjoint_backward(model, *s, cfg.loss, adj_sub);
        total.loss += g.loss;
        for (std::size_t i = 0; i < g.grad.size(); ++i) total.grad[i] += g.grad[i];
        total.peak_live_values = std::max(total.peak_live_values, g.peak_live_values);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    total.loss *= inv;
    for (double& g : total.grad) g *= inv;
    return total;
}

/// Adam with plateau decay and early stopping; the model ends at the best
/// validation parameters.
inline TrainResult train(NrdeModel& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                         const TrainConfig& cfg) {
    if (train_set.empty()) throw DomainError("train: empty training set");
    if (val_set.empty()) throw DomainError("train: empty validation set");
    if (cfg.batch_size < 1) throw DomainError("train: batch size must be >= 1");
    if (!(cfg.base_lr > 0.0)) throw DomainError("train: learning rate must be positive");

    std::vector<double> params = model.parameters();
    Adam opt(params.size(), cfg.initial_lr(), cfg.beta1, cfg.beta2, cfg.eps);
    PlateauSchedule schedule(cfg.plateau_patience, cfg.stop_patience, cfg.lr_decay);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    ad::Tape tape;

    TrainResult result;
    result.best_params = params;
    result.best_val_loss = INFINITY;
    std::vector<const Sample*> batch;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double train_loss = 0.0;
        std::size_t peak = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
                batch.push_back(&train_set[order[k]]);
            const GradResult g = batch_gradient(model, batch, cfg, tape);
            train_loss += g.loss * static_cast<double>(batch.size());
            peak = std::max(peak, g.peak_live_values);
            opt.step(params, g.grad);
            model.set_parameters(params);
        }
        train_loss /= static_cast<double>(order.size());
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double val_loss = evaluate(model, val_set, cfg.loss).loss;

        EpochRecord rec{epoch, train_loss, val_loss, opt.lr(), wall, peak};
        result.history.push_back(rec);

        double lr = opt.lr();
        const auto ev = schedule.observe(val_loss, lr);
        opt.set_lr(lr);
        if (ev == PlateauSchedule::Event::Improved) {
            result.best_epoch = epoch;
            result.best_val_loss = val_loss;
            result.best_params = params;
        } else if (ev == PlateauSchedule::Event::Stop) {
            result.early_stopped = true;
            break;
        }
    }
    model.set_parameters(result.best_params);
    return result;
}

}  // namespace nrde
