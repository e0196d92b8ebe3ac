#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "nrde/dataset.hpp"
#include "nrde/errors.hpp"
#include "nrde/nrde_model.hpp"
#include "nrde/training.hpp"

namespace nrde {

enum class MetricKind { Accuracy, Loss };

struct BenchmarkGrid {
    std::vector<int> depths{1, 2};
    std::vector<std::size_t> steps{1, 8, 32};
    std::size_t repeats = 1;
    MetricKind metric = MetricKind::Accuracy;

    void validate() const {
        static constexpr std::size_t kSteps[] = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
        if (depths.empty() || steps.empty()) throw DomainError("benchmark grid is empty");
        if (repeats < 1) throw DomainError("benchmark grid needs at least one repeat");
        for (int d : depths)
            if (d < 1 || d > 3) throw DomainError("grid depth " + std::to_string(d) + " outside {1,2,3}");
        for (std::size_t s : steps)
            if (std::find(std::begin(kSteps), std::end(kSteps), s) == std::end(kSteps))
                throw DomainError("grid step " + std::to_string(s) + " is not a power of two up to 1024");
    }
};

struct GridCell {
    int depth = 0;
    std::size_t step = 0;
    std::size_t repeats = 0;
    double metric = std::numeric_limits<double>::quiet_NaN();  // test metric, mean over repeats
    double metric_std = 0.0;
    double epochs = 0.0;        // mean epochs run
    double wall_clock_s = 0.0;  // mean seconds per epoch
    std::size_t peak_live_values = 0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    std::size_t stream_dim = 0;
    std::string error;  // non-empty if the cell failed
};

struct GridResult {
    std::vector<GridCell> cells;  // depth-major, in grid order
    std::size_t best_cell = 0;    // lowest mean validation loss among successful cells
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}
inline double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace detail

/// Trains one model per (depth, step, repeat). Repeat r uses seed `train.seed + r`
/// for both initialisation and batching. Cells run sequentially so per-epoch
/// timings are not contaminated by each other.
inline GridResult run_grid(const Dataset& ds, const BenchmarkGrid& grid, const NrdeConfig& base_model,
                           const TrainConfig& train_cfg, StreamCache* cache = nullptr,
                           std::ostream* log = nullptr) {
    grid.validate();
    if (!ds.normalized) throw DomainError("run_grid: dataset is not normalised");
    GridResult result;
    double best = std::numeric_limits<double>::infinity();
    for (int depth : grid.depths) {
        for (std::size_t step : grid.steps) {
            GridCell cell;
            cell.depth = depth;
            cell.step = step;
            cell.repeats = grid.repeats;
            try {
                const PreprocessResult pre = preprocess(ds, depth, step, cache);
                if (log)
                    for (const std::string& w : pre.warnings) *log << "warning: " << w << '\n';
                const std::vector<Sample> tr = make_samples(ds, pre.streams, Split::Train);
                const std::vector<Sample> va = make_samples(ds, pre.streams, Split::Val);
                const std::vector<Sample> te = make_samples(ds, pre.streams, Split::Test);
                cell.stream_dim = pre.streams.front().coord_dim();
                std::vector<double> metrics, epochs, walls, vals;
                for (std::size_t r = 0; r < grid.repeats; ++r) {
                    NrdeConfig mc = base_model;
                    mc.depth = depth;
                    mc.step = step;
                    mc.input_channels = static_cast<std::size_t>(ds.paths.front().channels());
                    NrdeModel model(mc);
                    model.init_seeded(train_cfg.seed + r);
                    TrainConfig tc = train_cfg;
                    tc.seed = train_cfg.seed + r;
                    const TrainResult tr_res = train(model, tr, va, tc);
                    const Evaluation ev = evaluate(model, te, tc.loss);
                    metrics.push_back(grid.metric == MetricKind::Accuracy ? ev.accuracy : ev.loss);
                    epochs.push_back(static_cast<double>(tr_res.history.size()));
                    double wall = 0.0;
                    for (const EpochRecord& e : tr_res.history) {
                        wall += e.wall_clock_s;
                        cell.peak_live_values = std::max(cell.peak_live_values, e.peak_live_values);
                    }
                    walls.push_back(wall / static_cast<double>(tr_res.history.size()));
                    vals.push_back(tr_res.best_val_loss);
                    if (log)
                        *log << "depth=" << depth << " step=" << step << " repeat=" << r
                             << " metric=" << metrics.back() << " epochs=" << tr_res.history.size()
                             << " s/epoch=" << walls.back() << '\n';
                }
                cell.metric = detail::mean_of(metrics);
                cell.metric_std = detail::std_of(metrics);
                cell.epochs = detail::mean_of(epochs);
                cell.wall_clock_s = detail::mean_of(walls);
                cell.val_loss = detail::mean_of(vals);
                if (cell.val_loss < best) {
                    best = cell.val_loss;
                    result.best_cell = result.cells.size();
                }
            } catch (const std::exception& e) {
                cell.error = e.what();
                if (log) *log << "cell depth=" << depth << " step=" << step << " failed: " << e.what() << '\n';
            }
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

inline void write_grid_csv(std::ostream& out, const GridResult& r) {
    out << "depth,step,repeat,metric,metric_std,epochs,wall_clock_s,peak_live_values\n";
    for (const GridCell& c : r.cells)
        out << c.depth << ',' << c.step << ',' << c.repeats << ',' << detail::format_double(c.metric) << ','
            << detail::format_double(c.metric_std) << ',' << detail::format_double(c.epochs) << ','
            << detail::format_double(c.wall_clock_s) << ',' << c.peak_live_values << '\n';
}

}  // namespace nrde
