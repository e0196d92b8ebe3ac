// nrde: log-signature preprocessing, log-ODE solves and Neural RDE training.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nrde/checkpoint.hpp"
#include "nrde/cde_solver.hpp"
#include "nrde/dataset.hpp"
#include "nrde/grid.hpp"
#include "nrde/igbm.hpp"
#include "nrde/lyndon.hpp"
#include "nrde/signature.hpp"
#include "nrde/synthetic.hpp"
#include "nrde/training.hpp"

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::string config;
    std::string out = ".";
};

struct DataOptions {
    std::string data_dir;
    bool header = false;
    bool synthetic = false;
    std::size_t count = 300;
    std::size_t length = 2048;
    int classes = 2;
    double noise = 0.2;
};

struct ModelOptions {
    std::size_t hidden = 8;
    std::size_t field_width = 16;
    std::size_t field_layers = 2;
    std::size_t substeps = 1;
    std::size_t epochs = 200;
    std::size_t batch = 32;
    double lr = 0.032;
    bool adjoint = false;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
    cmd->add_option("--data", d.data_dir, "Directory of CSV series with labels.csv (file,label)");
    cmd->add_flag("--header", d.header, "Series CSV files have a header row");
    cmd->add_flag("--synthetic", d.synthetic, "Use the synthetic rotation-sense classification task");
    cmd->add_option("--count", d.count, "Synthetic sample count")->check(CLI::PositiveNumber);
    cmd->add_option("--length", d.length, "Synthetic series length")->check(CLI::Range(64, 1 << 24));
    cmd->add_option("--classes", d.classes, "Synthetic class count")->check(CLI::Range(2, 64));
    cmd->add_option("--noise", d.noise, "Synthetic noise level")->check(CLI::NonNegativeNumber);
}

void add_model_options(CLI::App* cmd, ModelOptions& m) {
    cmd->add_option("--hidden", m.hidden, "Hidden state width")->check(CLI::PositiveNumber);
    cmd->add_option("--field-width", m.field_width, "Field network width")->check(CLI::PositiveNumber);
    cmd->add_option("--field-layers", m.field_layers, "Field network hidden layers")->check(CLI::PositiveNumber);
    cmd->add_option("--substeps", m.substeps, "RK4 steps per interval")->check(CLI::PositiveNumber);
    cmd->add_option("--epochs", m.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--batch", m.batch, "Batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", m.lr, "Base learning rate (divided by the batch size)")->check(CLI::PositiveNumber);
    cmd->add_flag("--adjoint", m.adjoint, "Use adjoint gradients instead of backprop through the solver");
}

nrde::Dataset load_dataset(const DataOptions& d, std::uint64_t seed) {
    if (d.synthetic) {
        nrde::SyntheticConfig sc;
        sc.count = d.count;
        sc.length = d.length;
        sc.classes = d.classes;
        sc.seed = seed;
        sc.noise = d.noise;
        return nrde::gen_synthetic_classification(sc);
    }
    if (d.data_dir.empty()) throw std::runtime_error("either --data DIR or --synthetic is required");
    const fs::path dir(d.data_dir);
    const fs::path labels = dir / "labels.csv";
    std::ifstream in(labels);
    if (!in) throw std::runtime_error("cannot open " + labels.string());
    nrde::Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (nrde::detail::trim(line).empty()) continue;
        const auto cells = nrde::detail::split_csv_line(line);
        double label = 0.0;
        if (cells.size() != 2 || !nrde::detail::parse_double(cells[1], label) || label < 0 ||
            label != std::floor(label))
            throw nrde::ParseError(labels.string(), line_no, "expected 'file,label' with a non-negative integer label");
        ds.paths.push_back(nrde::load_csv((dir / std::string(nrde::detail::trim(cells[0]))).string(), d.header));
        ds.targets.push_back(nrde::Target{static_cast<int>(label), {}});
        max_label = std::max(max_label, static_cast<int>(label));
    }
    ds.num_classes = max_label + 1;
    return ds;
}

nrde::NrdeConfig model_config(const ModelOptions& m, const nrde::Dataset& ds, int depth, std::size_t step) {
    nrde::NrdeConfig c;
    c.input_channels = static_cast<std::size_t>(ds.paths.front().channels());
    c.hidden = m.hidden;
    c.field_width = m.field_width;
    c.field_layers = m.field_layers;
    c.outputs = static_cast<std::size_t>(std::max(ds.num_classes, 2));
    c.depth = depth;
    c.step = step;
    c.substeps = m.substeps;
    return c;
}

nrde::TrainConfig train_config(const ModelOptions& m, std::uint64_t seed) {
    nrde::TrainConfig t;
    t.batch_size = m.batch;
    t.base_lr = m.lr;
    t.max_epochs = m.epochs;
    t.seed = seed;
    t.gradient = m.adjoint ? nrde::GradientMode::Adjoint : nrde::GradientMode::Backprop;
    return t;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

/// Inserts `--key=value` for every config entry right after the subcommand
/// name, so explicit command-line flags (which follow) take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args, const std::vector<std::string>& subcommands) {
    std::string config;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
    }
    if (config.empty()) return args;
    std::vector<std::string> injected;
    for (const auto& [k, v] : nrde::parse_config(config)) injected.push_back("--" + k + "=" + v);
    std::size_t pos = args.size();
    for (std::size_t i = 0; i < args.size(); ++i)
        if (std::find(subcommands.begin(), subcommands.end(), args[i]) != subcommands.end()) {
            pos = i + 1;
            break;
        }
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(pos), injected.begin(), injected.end());
    return args;
}

std::ostream& open_output(const Globals& g, const std::string& name, std::ofstream& file) {
    fs::create_directories(g.out);
    const fs::path p = fs::path(g.out) / name;
    file.open(p);
    if (!file) throw std::runtime_error("cannot write " + p.string());
    return file;
}

int run_basis(int d, int depth) {
    const nrde::LyndonBasis basis(d, depth);
    for (const nrde::Word& w : basis.words()) std::cout << nrde::word_to_string(w, d) << '\n';
    std::cout << "beta=" << nrde::logsig_dim(d, depth) << '\n';
    return 0;
}

int run_logsig(const Globals& g, const std::string& input, int depth, std::size_t step, bool header,
               bool to_stdout) {
    const nrde::PiecewiseLinearPath path = nrde::load_csv(input, header);
    const nrde::LyndonBasis basis(path.channels(), depth);
    const std::vector<double> part = nrde::index_partition(path, step);
    const nrde::LogSignatureStream s = nrde::logsig_stream(path, part, basis);
    std::ofstream file;
    std::ostream& out = to_stdout ? std::cout : open_output(g, "logsig.csv", file);
    out << "r_start,r_end";
    for (const nrde::Word& w : basis.words()) out << ",w" << nrde::word_to_string(w, path.channels());
    out << '\n';
    for (std::size_t i = 0; i < s.num_intervals(); ++i) {
        out << nrde::detail::format_double(s.partition[i]) << ',' << nrde::detail::format_double(s.partition[i + 1]);
        for (double c : s.coords[i]) out << ',' << nrde::detail::format_double(c);
        out << '\n';
    }
    return 0;
}

nrde::LinearVectorField random_linear_field(std::size_t n, std::size_t d, double scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, scale / std::sqrt(static_cast<double>(n)));
    nrde::LinearVectorField f = nrde::LinearVectorField::zeros(n, d);
    for (auto& m : f.a)
        for (double& x : m.data) x = nd(rng);
    for (auto& b : f.b)
        for (double& x : b) x = nd(rng);
    return f;
}

int run_solve(const Globals& g, const std::string& input, int depth, std::size_t step, bool header, std::size_t state,
              double scale, std::size_t substeps, bool convergence) {
    const nrde::PiecewiseLinearPath path = nrde::load_csv(input, header);
    const nrde::LinearVectorField f =
        random_linear_field(state, static_cast<std::size_t>(path.channels()), scale, g.seed);
    const nrde::Vec y0(state, 1.0);
    if (convergence) {
        const nrde::Vec ref = nrde::linear_cde_reference(f, y0, path);
        std::cout << "step,depth,error\n";
        for (std::size_t s = step; s <= path.num_segments(); s *= 2) {
            const std::vector<double> part = nrde::index_partition(path, s);
            for (int n = 1; n <= depth; ++n) {
                const nrde::Vec y = nrde::logode_solve(f, y0, path, part, n, nrde::OdeSolveConfig{substeps}).back();
                double e = 0.0;
                for (std::size_t i = 0; i < state; ++i) e += (y[i] - ref[i]) * (y[i] - ref[i]);
                std::cout << s << ',' << n << ',' << nrde::detail::format_double(std::sqrt(e)) << '\n';
            }
        }
        return 0;
    }
    const std::vector<double> part = nrde::index_partition(path, step);
    const auto traj = nrde::logode_solve(f, y0, path, part, depth, nrde::OdeSolveConfig{substeps});
    std::ofstream file;
    std::ostream& out = open_output(g, "solve.csv", file);
    out << "t";
    for (std::size_t i = 0; i < state; ++i) out << ",y" << i;
    out << '\n';
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out << nrde::detail::format_double(part[i]);
        for (double y : traj[i]) out << ',' << nrde::detail::format_double(y);
        out << '\n';
    }
    std::cout << "wrote " << (fs::path(g.out) / "solve.csv").string() << '\n';
    return 0;
}

int run_train(const Globals& g, const DataOptions& d, const ModelOptions& m, int depth, std::size_t step) {
    nrde::Dataset ds = load_dataset(d, g.seed);
    nrde::normalize_split(ds, {}, g.seed);
    nrde::StreamCache cache(fs::path(g.out) / "cache");
    const nrde::PreprocessResult pre = nrde::preprocess(ds, depth, step, &cache);
    for (const std::string& w : pre.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "streams: " << (pre.cache_hit ? "cache hit" : "computed") << '\n';
    const auto tr = nrde::make_samples(ds, pre.streams, nrde::Split::Train);
    const auto va = nrde::make_samples(ds, pre.streams, nrde::Split::Val);
    const auto te = nrde::make_samples(ds, pre.streams, nrde::Split::Test);
    nrde::NrdeModel model(model_config(m, ds, depth, step));
    model.init_seeded(g.seed);
    const nrde::TrainResult res = nrde::train(model, tr, va, train_config(m, g.seed));
    const nrde::Evaluation ev = nrde::evaluate(model, te, nrde::LossKind::CrossEntropy);
    std::ofstream hist;
    nrde::write_history_csv(open_output(g, "history.csv", hist), res.history);
    nrde::save_model((fs::path(g.out) / "model.bin").string(), model);
    std::cout << "epochs=" << res.history.size() << " best_epoch=" << res.best_epoch
              << " val_loss=" << res.best_val_loss << " test_loss=" << ev.loss << " test_accuracy=" << ev.accuracy
              << '\n';
    return 0;
}

int run_grid(const Globals& g, const DataOptions& d, const ModelOptions& m, const std::string& depths,
             const std::string& steps, std::size_t repeats) {
    nrde::BenchmarkGrid grid;
    grid.depths.clear();
    grid.steps.clear();
    for (const std::string& s : split_list(depths)) grid.depths.push_back(std::stoi(s));
    for (const std::string& s : split_list(steps)) grid.steps.push_back(static_cast<std::size_t>(std::stoul(s)));
    grid.repeats = repeats;
    grid.validate();
    nrde::Dataset ds = load_dataset(d, g.seed);
    nrde::normalize_split(ds, {}, g.seed);
    nrde::StreamCache cache(fs::path(g.out) / "cache");
    const nrde::GridResult r =
        nrde::run_grid(ds, grid, model_config(m, ds, 1, 1), train_config(m, g.seed), &cache, &std::cerr);
    std::ofstream file;
    nrde::write_grid_csv(open_output(g, "results.csv", file), r);
    for (const nrde::GridCell& c : r.cells)
        if (!c.error.empty()) std::cerr << "cell depth=" << c.depth << " step=" << c.step << " failed: " << c.error << '\n';
    const nrde::GridCell& best = r.cells.at(r.best_cell);
    std::cout << "validation-argmin cell: depth=" << best.depth << " step=" << best.step << " val_loss=" << best.val_loss
              << " metric=" << best.metric << '\n';
    return 0;
}

int run_igbm(const Globals& g, nrde::IgbmParams p, const std::string& coarse, std::size_t seeds) {
    std::vector<std::size_t> steps;
    for (const std::string& s : split_list(coarse)) steps.push_back(static_cast<std::size_t>(std::stoul(s)));
    std::cout << "seed,coarse_steps,error_depth3,error_depth1\n";
    for (std::size_t k = 0; k < seeds; ++k) {
        p.seed = g.seed + k;
        const nrde::IgbmReport rep = nrde::igbm_demo(p, steps);
        for (const nrde::IgbmRow& row : rep.rows)
            std::cout << p.seed << ',' << row.coarse_steps << ',' << nrde::detail::format_double(row.error_depth3)
                      << ',' << nrde::detail::format_double(row.error_depth1) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Log-signature preprocessing, log-ODE solves and Neural RDE training", "nrde"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--config", g.config, "Config file of 'key = value' lines");
    app.add_option("--out", g.out, "Output directory");

    int d = 2, depth = 2;
    std::size_t step = 1, state = 2, substeps = 4, repeats = 1, seeds = 1;
    bool header = false, to_stdout = false, convergence = false;
    double scale = 1.0;
    std::string input, depths = "1,2", steps = "1,8,32", coarse = "25,1000";
    DataOptions data;
    ModelOptions model;
    nrde::IgbmParams igbm;

    CLI::App* basis = app.add_subcommand("basis", "Print the Lyndon basis and its size");
    basis->add_option("--d", d, "Alphabet size")->check(CLI::Range(1, 64));
    basis->add_option("--depth", depth, "Truncation depth")->check(CLI::Range(1, 16));

    CLI::App* logsig = app.add_subcommand("logsig", "Windowed log-signatures of a CSV series");
    logsig->add_option("input", input, "Input CSV (first column time)")->required();
    logsig->add_option("--depth", depth, "Truncation depth")->check(CLI::Range(1, 8));
    logsig->add_option("--step", step, "Samples per window")->check(CLI::PositiveNumber);
    logsig->add_flag("--header", header, "Input has a header row");
    logsig->add_flag("--stdout", to_stdout, "Write to standard output instead of OUT/logsig.csv");

    CLI::App* solve = app.add_subcommand("solve", "Log-ODE solve of a random linear CDE driven by a CSV series");
    solve->add_option("input", input, "Input CSV (first column time)")->required();
    solve->add_option("--depth", depth, "Truncation depth")->check(CLI::Range(1, 6));
    solve->add_option("--step", step, "Samples per interval")->check(CLI::PositiveNumber);
    solve->add_option("--state", state, "State dimension")->check(CLI::PositiveNumber);
    solve->add_option("--scale", scale, "Field scale")->check(CLI::NonNegativeNumber);
    solve->add_option("--substeps", substeps, "RK4 steps per interval")->check(CLI::PositiveNumber);
    solve->add_flag("--header", header, "Input has a header row");
    solve->add_flag("--convergence", convergence, "Print errors against a fine reference for depths 1..depth");

    CLI::App* train = app.add_subcommand("train", "Train a Neural RDE classifier");
    train->add_option("--depth", depth, "Log-signature depth")->check(CLI::Range(1, 3));
    train->add_option("--step", step, "Samples per interval")->check(CLI::PositiveNumber);
    add_data_options(train, data);
    add_model_options(train, model);

    CLI::App* grid = app.add_subcommand("grid", "Depth x step benchmark grid");
    grid->add_option("--depths", depths, "Comma-separated depths");
    grid->add_option("--steps", steps, "Comma-separated steps");
    grid->add_option("--repeats", repeats, "Repeats per cell")->check(CLI::PositiveNumber);
    add_data_options(grid, data);
    add_model_options(grid, model);

    CLI::App* ig = app.add_subcommand("igbm", "High-order log-ODE demo on inhomogeneous geometric Brownian motion");
    ig->add_option("--a", igbm.a, "Mean-reversion rate")->check(CLI::NonNegativeNumber);
    ig->add_option("--b", igbm.b, "Mean-reversion level")->check(CLI::NonNegativeNumber);
    ig->add_option("--sigma", igbm.sigma, "Volatility")->check(CLI::NonNegativeNumber);
    ig->add_option("--y0", igbm.y0, "Initial value");
    ig->add_option("--horizon", igbm.horizon, "Time horizon")->check(CLI::PositiveNumber);
    ig->add_option("--fine", igbm.fine_steps, "Fine mesh steps")->check(CLI::PositiveNumber);
    ig->add_option("--coarse", coarse, "Comma-separated coarse step counts");
    ig->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(std::move(args), {"basis", "logsig", "solve", "train", "grid", "igbm"});
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const nrde::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (*basis) return run_basis(d, depth);
        if (*logsig) return run_logsig(g, input, depth, step, header, to_stdout);
        if (*solve) return run_solve(g, input, depth, step, header, state, scale, substeps, convergence);
        if (*train) return run_train(g, data, model, depth, step);
        if (*grid) return run_grid(g, data, model, depths, steps, repeats);
        if (*ig) return run_igbm(g, igbm, coarse, seeds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
