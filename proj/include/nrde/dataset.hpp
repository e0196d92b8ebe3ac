#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nrde/binary_io.hpp"
#include "nrde/errors.hpp"
#include "nrde/nrde_model.hpp"
#include "nrde/signature.hpp"

namespace nrde {

enum class Split : std::uint8_t { Train, Val, Test };

struct Dataset {
    std::vector<PiecewiseLinearPath> paths;
    std::vector<Target> targets;
    std::vector<Split> splits;  // empty until normalize_split
    int num_classes = 0;        // 0 for regression
    Vec mean;                   // per embedded channel (time first), from the training split
    Vec stddev;
    bool normalized = false;

    std::size_t size() const noexcept { return paths.size(); }
    std::vector<std::size_t> indices(Split s) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < splits.size(); ++i)
            if (splits[i] == s) out.push_back(i);
        return out;
    }

    /// Hash of times, values and targets.
    std::uint64_t content_hash() const {
        io::Fnv1a h;
        h.u64(paths.size());
        for (std::size_t i = 0; i < paths.size(); ++i) {
            const PiecewiseLinearPath& p = paths[i];
            h.u64(p.num_points());
            h.u64(static_cast<std::uint64_t>(p.data_dim()));
            for (double t : p.times()) h.f64(t);
            for (double v : p.values()) h.f64(v);
            if (i < targets.size()) {
                h.u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(targets[i].label)));
                for (double v : targets[i].values) h.f64(v);
            }
        }
        return h.value();
    }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// Reads a time series: first column time (strictly increasing), remaining columns features.
inline PiecewiseLinearPath load_csv(const std::string& file, bool has_header = false) {
    std::ifstream in(file);
    if (!in) throw ParseError(file, 0, "cannot open file");
    std::string line;
    std::size_t line_no = 0;
    std::vector<double> times, values;
    std::size_t columns = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && has_header) continue;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (columns == 0) {
            columns = cells.size();
        } else if (cells.size() != columns) {
            throw ParseError(file, line_no,
                             "expected " + std::to_string(columns) + " columns, found " + std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            if (!detail::parse_double(cells[c], v) || !std::isfinite(v))
                throw ParseError(file, line_no, "non-numeric cell '" + std::string(detail::trim(cells[c])) + "'");
            if (c == 0) {
                if (!times.empty() && !(v > times.back()))
                    throw ParseError(file, line_no, "time " + detail::format_double(v) + " is not after previous " +
                                                        detail::format_double(times.back()));
                times.push_back(v);
            } else {
                values.push_back(v);
            }
        }
    }
    if (times.size() < 2) throw ParseError(file, line_no, "need at least two rows");
    return PiecewiseLinearPath(std::move(times), std::move(values), static_cast<int>(columns) - 1);
}

/// Shortest round-trip decimal formatting, so load_csv(write_csv(p)) is exact.
inline void write_csv(const std::string& file, const PiecewiseLinearPath& path, bool header = false) {
    std::ofstream out(file);
    if (!out) throw ParseError(file, 0, "cannot open file for writing");
    if (header) {
        out << "t";
        for (int c = 0; c < path.data_dim(); ++c) out << ",x" << c;
        out << '\n';
    }
    for (std::size_t i = 0; i < path.num_points(); ++i) {
        out << detail::format_double(path.times()[i]);
        for (double v : path.row(i)) out << ',' << detail::format_double(v);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Normalisation and splits

struct SplitFractions {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

/// Seeded shuffle into train/val/test (fractional counts round toward train),
/// then per-channel standardisation with training-split statistics. Time is
/// standardised like any other channel.
inline Dataset& normalize_split(Dataset& ds, SplitFractions fr = {}, std::uint64_t seed = 0) {
    if (ds.normalized) throw DomainError("dataset is already normalised");
    const std::size_t n = ds.size();
    if (n < 3) throw DomainError("normalize_split needs at least 3 samples, got " + std::to_string(n));
    if (fr.train < 0 || fr.val < 0 || fr.test < 0) throw DomainError("split fractions must be non-negative");
    const double total = fr.train + fr.val + fr.test;
    auto count_for = [&](double f) {
        std::size_t k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f / total));
        if (f > 0.0 && k == 0) k = 1;
        return k;
    };
    const std::size_t n_val = count_for(fr.val);
    const std::size_t n_test = count_for(fr.test);
    if (n_val == 0 || n_test == 0 || n_val + n_test >= n)
        throw DomainError("split fractions leave an empty split");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    ds.splits.assign(n, Split::Train);
    for (std::size_t k = 0; k < n_val; ++k) ds.splits[order[k]] = Split::Val;
    for (std::size_t k = n_val; k < n_val + n_test; ++k) ds.splits[order[k]] = Split::Test;

    const std::size_t v = static_cast<std::size_t>(ds.paths.front().channels());
    for (const PiecewiseLinearPath& p : ds.paths)
        if (static_cast<std::size_t>(p.channels()) != v) throw ShapeError("samples have different channel counts");

    Vec sum(v, 0.0), sumsq(v, 0.0);
    double count = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (ds.splits[i] != Split::Train) continue;
        const PiecewiseLinearPath& p = ds.paths[i];
        for (std::size_t k = 0; k < p.num_points(); ++k) {
            sum[0] += p.times()[k];
            std::span<const double> r = p.row(k);
            for (std::size_t c = 1; c < v; ++c) sum[c] += r[c - 1];
        }
        count += static_cast<double>(p.num_points());
    }
    ds.mean.assign(v, 0.0);
    for (std::size_t c = 0; c < v; ++c) ds.mean[c] = sum[c] / count;
    for (std::size_t i = 0; i < n; ++i) {
        if (ds.splits[i] != Split::Train) continue;
        const PiecewiseLinearPath& p = ds.paths[i];
        for (std::size_t k = 0; k < p.num_points(); ++k) {
            const double dt = p.times()[k] - ds.mean[0];
            sumsq[0] += dt * dt;
            std::span<const double> r = p.row(k);
            for (std::size_t c = 1; c < v; ++c) {
                const double dx = r[c - 1] - ds.mean[c];
                sumsq[c] += dx * dx;
            }
        }
    }
    ds.stddev.assign(v, 0.0);
    for (std::size_t c = 0; c < v; ++c) ds.stddev[c] = std::max(std::sqrt(sumsq[c] / count), 1e-8);

    for (PiecewiseLinearPath& p : ds.paths) {
        std::vector<double> t = p.times();
        for (double& x : t) x = (x - ds.mean[0]) / ds.stddev[0];
        std::vector<double> vals = p.values();
        const std::size_t dd = v - 1;
        for (std::size_t k = 0; k < p.num_points(); ++k)
            for (std::size_t c = 0; c < dd; ++c) vals[k * dd + c] = (vals[k * dd + c] - ds.mean[c + 1]) / ds.stddev[c + 1];
        p = PiecewiseLinearPath(std::move(t), std::move(vals), p.data_dim());
    }
    ds.normalized = true;
    return ds;
}

// ---------------------------------------------------------------------------
// Preprocessing into log-signature streams, with an on-disk cache

struct PreprocessResult {
    std::vector<LogSignatureStream> streams;
    bool cache_hit = false;
    std::vector<std::string> warnings;
};

/// Stream cache file:
///   "NRDESTRM" | u32 version | u64 content hash | u32 v | u32 N | u64 step |
///   u32 tag length | tag | u64 sample count | per sample: u64 m, then m rows
///   of (r_i, r_{i+1}, coords...) as f64. All integers and floats little-endian.
class StreamCache {
public:
    static constexpr std::uint32_t kVersion = 1;
    static constexpr const char* kMagic = "NRDESTRM";
    static constexpr const char* kBasisTag = "lyndon-length-lex";

    StreamCache() = default;
    explicit StreamCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    bool enabled() const { return !dir_.empty(); }
    std::size_t hits() const noexcept { return hits_; }
    std::size_t misses() const noexcept { return misses_; }
    std::size_t computations() const noexcept { return computations_; }

    std::filesystem::path file_for(std::uint64_t hash, int depth, std::size_t step) const {
        char name[96];
        std::snprintf(name, sizeof(name), "streams_%016llx_N%d_s%zu.bin", static_cast<unsigned long long>(hash),
                      depth, step);
        return dir_ / name;
    }

    static void write(const std::filesystem::path& file, std::uint64_t hash, int v, int depth, std::size_t step,
                      const std::vector<LogSignatureStream>& streams) {
        std::ofstream out(file, std::ios::binary);
        if (!out) throw ParseError(file.string(), 0, "cannot open cache file for writing");
        io::write_bytes(out, kMagic);
        io::write_u32(out, kVersion);
        io::write_u64(out, hash);
        io::write_u32(out, static_cast<std::uint32_t>(v));
        io::write_u32(out, static_cast<std::uint32_t>(depth));
        io::write_u64(out, step);
        const std::string tag = kBasisTag;
        io::write_u32(out, static_cast<std::uint32_t>(tag.size()));
        io::write_bytes(out, tag);
        io::write_u64(out, streams.size());
        for (const LogSignatureStream& s : streams) {
            io::write_u64(out, s.num_intervals());
            for (std::size_t i = 0; i < s.num_intervals(); ++i) {
                io::write_f64(out, s.partition[i]);
                io::write_f64(out, s.partition[i + 1]);
                for (double c : s.coords[i]) io::write_f64(out, c);
            }
        }
    }

    static std::vector<LogSignatureStream> read(const std::filesystem::path& file, std::uint64_t hash, int v,
                                                int depth, std::size_t step) {
        const std::string name = file.string();
        std::ifstream in(file, std::ios::binary);
        if (!in) throw ParseError(name, 0, "cannot open cache file");
        if (io::read_bytes(in, 8, name) != kMagic) throw ParseError(name, 0, "bad magic");
        if (io::read_u32(in, name) != kVersion) throw ParseError(name, 0, "unsupported version");
        if (io::read_u64(in, name) != hash) throw ParseError(name, 0, "content hash mismatch");
        if (io::read_u32(in, name) != static_cast<std::uint32_t>(v) ||
            io::read_u32(in, name) != static_cast<std::uint32_t>(depth) || io::read_u64(in, name) != step)
            throw ParseError(name, 0, "cache header does not match request");
        const std::uint32_t tag_len = io::read_u32(in, name);
        if (io::read_bytes(in, tag_len, name) != kBasisTag) throw ParseError(name, 0, "unknown basis tag");
        const std::size_t beta = static_cast<std::size_t>(logsig_dim(v, depth));
        const std::uint64_t count = io::read_u64(in, name);
        std::vector<LogSignatureStream> streams(count);
        for (LogSignatureStream& s : streams) {
            s.dim = v;
            s.depth = depth;
            const std::uint64_t m = io::read_u64(in, name);
            s.coords.resize(m, std::vector<double>(beta));
            for (std::size_t i = 0; i < m; ++i) {
                const double r0 = io::read_f64(in, name);
                const double r1 = io::read_f64(in, name);
                if (i == 0) s.partition.push_back(r0);
                s.partition.push_back(r1);
                for (double& c : s.coords[i]) c = io::read_f64(in, name);
            }
        }
        return streams;
    }

    PreprocessResult preprocess(const Dataset& ds, int depth, std::size_t step) {
        if (ds.paths.empty()) throw DomainError("preprocess: empty dataset");
        PreprocessResult out;
        const int v = ds.paths.front().channels();
        const std::uint64_t hash = ds.content_hash();
        for (const PiecewiseLinearPath& p : ds.paths)
            if (step >= p.num_points()) {
                out.warnings.push_back("step " + std::to_string(step) + " >= series length " +
                                       std::to_string(p.num_points()) + "; using a single interval");
                break;
            }
        if (enabled()) {
            const std::filesystem::path file = file_for(hash, depth, step);
            if (std::filesystem::exists(file)) {
                out.streams = read(file, hash, v, depth, step);
                out.cache_hit = true;
                ++hits_;
                return out;
            }
        }
        ++misses_;
        const LyndonBasis basis(v, depth);
        out.streams.reserve(ds.size());
        for (const PiecewiseLinearPath& p : ds.paths) {
            const std::vector<double> part = index_partition(p, std::max<std::size_t>(step, 1));
            out.streams.push_back(logsig_stream(p, part, basis));
            ++computations_;
        }
        if (enabled()) {
            std::filesystem::create_directories(dir_);
            write(file_for(hash, depth, step), hash, v, depth, step, out.streams);
        }
        return out;
    }

private:
    std::filesystem::path dir_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
    std::size_t computations_ = 0;
};

/// Log-signature streams of every sample on the index partition with the given step.
inline PreprocessResult preprocess(const Dataset& ds, int depth, std::size_t step, StreamCache* cache = nullptr) {
    if (!ds.normalized) throw DomainError("preprocess: dataset is not normalised");
    StreamCache local;
    return (cache ? *cache : local).preprocess(ds, depth, step);
}

/// Raw per-sample increments as a depth-1 "stream" built without any
/// signature computation: the linear-interpolation Neural CDE driver.
inline LogSignatureStream increment_stream(const PiecewiseLinearPath& p) {
    LogSignatureStream s;
    s.dim = p.channels();
    s.depth = 1;
    s.partition = p.times();
    for (std::size_t i = 0; i < p.num_segments(); ++i) {
        std::vector<double> inc(static_cast<std::size_t>(p.channels()));
        inc[0] = p.times()[i + 1] - p.times()[i];
        for (int c = 0; c < p.data_dim(); ++c)
            inc[static_cast<std::size_t>(c) + 1] = p.row(i + 1)[static_cast<std::size_t>(c)] - p.row(i)[static_cast<std::size_t>(c)];
        s.coords.push_back(std::move(inc));
    }
    return s;
}

inline std::vector<Sample> make_samples(const Dataset& ds, const std::vector<LogSignatureStream>& streams, Split split) {
    if (streams.size() != ds.size()) throw ShapeError("make_samples: one stream per sample required");
    std::vector<Sample> out;
    for (std::size_t i : ds.indices(split)) out.push_back(Sample{streams[i], ds.paths[i].point(0), ds.targets[i]});
    return out;
}

}  // namespace nrde
