#pragma once

// Signatures and log-signatures of piecewise-linear paths.
//
// A PiecewiseLinearPath stores sample times and data rows; the embedded path
// that every transform sees is X_t = (t, x_t), i.e. time is channel 0 and the
// path has v = data_dim + 1 channels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nrde/errors.hpp"
#include "nrde/lyndon.hpp"
#include "nrde/tensor_algebra.hpp"

namespace nrde {

class PiecewiseLinearPath {
public:
    PiecewiseLinearPath() = default;

    /// `values` is row-major, one row of `data_dim` entries per time.
    PiecewiseLinearPath(std::vector<double> times, std::vector<double> values, int data_dim)
        : times_(std::move(times)), values_(std::move(values)), data_dim_(data_dim) {
        if (data_dim_ < 0) throw ShapeError("negative data dimension");
        if (times_.size() < 2) throw DomainError("a path needs at least two samples");
        if (values_.size() != times_.size() * static_cast<std::size_t>(data_dim_))
            throw ShapeError("path has " + std::to_string(times_.size()) + " times but " +
                             std::to_string(values_.size()) + " values for data dimension " +
                             std::to_string(data_dim_));
        for (std::size_t i = 0; i + 1 < times_.size(); ++i)
            if (!(times_[i] < times_[i + 1]))
                throw DomainError("path times must be strictly increasing (sample " + std::to_string(i + 1) + ")");
    }

    std::size_t num_points() const noexcept { return times_.size(); }
    std::size_t num_segments() const noexcept { return times_.size() - 1; }
    int data_dim() const noexcept { return data_dim_; }
    /// Channel count of the embedded path (time included).
    int channels() const noexcept { return data_dim_ + 1; }
    double start() const { return times_.front(); }
    double end() const { return times_.back(); }

    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * static_cast<std::size_t>(data_dim_), static_cast<std::size_t>(data_dim_)};
    }

    /// Embedded point (t_i, x_i).
    std::vector<double> point(std::size_t i) const {
        std::vector<double> p(static_cast<std::size_t>(channels()));
        p[0] = times_[i];
        std::span<const double> r = row(i);
        std::copy(r.begin(), r.end(), p.begin() + 1);
        return p;
    }

    /// Embedded value at time t by linear interpolation (t clamped to the domain).
    std::vector<double> at(double t) const {
        if (t <= times_.front()) return point(0);
        if (t >= times_.back()) return point(num_points() - 1);
        const std::size_t seg = segment_index(t);
        const double t0 = times_[seg], t1 = times_[seg + 1];
        const double w = (t - t0) / (t1 - t0);
        std::vector<double> p(static_cast<std::size_t>(channels()));
        p[0] = t;
        std::span<const double> r0 = row(seg), r1 = row(seg + 1);
        for (int c = 0; c < data_dim_; ++c) p[static_cast<std::size_t>(c) + 1] = r0[c] + w * (r1[c] - r0[c]);
        return p;
    }

    /// Index i of the segment [t_i, t_{i+1}) containing t (last segment for t == t_n).
    std::size_t segment_index(double t) const {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        std::size_t i = static_cast<std::size_t>(std::distance(times_.begin(), it));
        if (i == 0) return 0;
        return std::min(i - 1, num_segments() - 1);
    }

    PiecewiseLinearPath& set_values(std::vector<double> values) {
        if (values.size() != values_.size()) throw ShapeError("set_values: size mismatch");
        values_ = std::move(values);
        return *this;
    }
    PiecewiseLinearPath& set_times(std::vector<double> times) {
        *this = PiecewiseLinearPath(std::move(times), std::move(values_), data_dim_);
        return *this;
    }

private:
    std::vector<double> times_;
    std::vector<double> values_;
    int data_dim_ = 0;
};

struct LogSignature {
    int dim = 0;
    int depth = 0;
    double start = 0.0;
    double end = 0.0;
    std::vector<double> coords;  // Lyndon basis order
};

/// Log-signatures over consecutive intervals [r_i, r_{i+1}] of a partition.
struct LogSignatureStream {
    int dim = 0;
    int depth = 0;
    std::vector<double> partition;            // r_0 < ... < r_m
    std::vector<std::vector<double>> coords;  // m rows of logsig_dim(dim, depth)

    std::size_t num_intervals() const noexcept { return coords.size(); }
    std::size_t coord_dim() const noexcept { return coords.empty() ? 0 : coords.front().size(); }
    double width(std::size_t i) const { return partition[i + 1] - partition[i]; }
    LogSignature interval(std::size_t i) const {
        return LogSignature{dim, depth, partition.at(i), partition.at(i + 1), coords.at(i)};
    }
};

/// S <- S (x) exp(x) for a level-1 increment x, in place (Horner per level).
inline void mul_segment_exp(TruncatedTensor& s, std::span<const double> x) {
    const int depth = s.depth();
    const std::size_t d = static_cast<std::size_t>(s.dim());
    if (x.size() != d) throw ShapeError("increment width does not match tensor dimension");
    std::vector<double> acc, next;
    for (int n = depth; n >= 1; --n) {
        // acc = (((S_0 x/n + S_1) x/(n-1) + S_2) ... + S_{n-1}) x/1
        acc.assign(d, 0.0);
        const double s0 = s.scalar();
        for (std::size_t j = 0; j < d; ++j) acc[j] = s0 * x[j] / n;
        for (int k = 1; k < n; ++k) {
            std::span<const double> sk = s.level(k);
            next.assign(acc.size() * d, 0.0);
            const double inv = 1.0 / (n - k);
            for (std::size_t i = 0; i < acc.size(); ++i) {
                const double a = (acc[i] + sk[i]) * inv;
                double* out = next.data() + i * d;
                for (std::size_t j = 0; j < d; ++j) out[j] = a * x[j];
            }
            acc.swap(next);
        }
        std::span<double> sn = s.level(n);
        for (std::size_t i = 0; i < sn.size(); ++i) sn[i] += acc[i];
    }
}

/// Signature of a single linear segment: exp of the increment placed at level 1.
inline TruncatedTensor segment_signature(std::span<const double> increment, int depth) {
    for (double v : increment)
        if (!std::isfinite(v)) throw DomainError("segment_signature: non-finite increment");
    TensorShape shape(static_cast<int>(increment.size()), depth);
    return tensor_exp(TruncatedTensor::from_level1(shape, increment));
}

namespace detail {

inline void check_interval(const PiecewiseLinearPath& path, double a, double b) {
    if (!(a < b)) throw DomainError("degenerate interval [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    if (a < path.start() || b > path.end())
        throw DomainError("interval [" + std::to_string(a) + ", " + std::to_string(b) + "] outside path domain [" +
                          std::to_string(path.start()) + ", " + std::to_string(path.end()) + "]");
}

/// Calls fn(increment) for each linear piece of the path clipped to [a, b], in time order.
template <class Fn>
void for_each_piece(const PiecewiseLinearPath& path, double a, double b, Fn&& fn) {
    const std::size_t v = static_cast<std::size_t>(path.channels());
    std::vector<double> inc(v);
    std::size_t seg = path.segment_index(a);
    std::vector<double> left = path.at(a);
    while (true) {
        const double seg_end = path.times()[seg + 1];
        const bool last = seg_end >= b;
        std::vector<double> right = last ? path.at(b) : path.point(seg + 1);
        for (std::size_t c = 0; c < v; ++c) inc[c] = right[c] - left[c];
        fn(std::span<const double>(inc));
        if (last) break;
        left = std::move(right);
        ++seg;
    }
}

}  // namespace detail

/// Depth-N signature of the embedded path over [a, b] by Chen's identity.
inline TruncatedTensor path_signature(const PiecewiseLinearPath& path, double a, double b, int depth) {
    detail::check_interval(path, a, b);
    TruncatedTensor sig = TruncatedTensor::unit(TensorShape(path.channels(), depth));
    detail::for_each_piece(path, a, b, [&](std::span<const double> inc) { mul_segment_exp(sig, inc); });
    return sig;
}

inline TruncatedTensor path_signature(const PiecewiseLinearPath& path, int depth) {
    return path_signature(path, path.start(), path.end(), depth);
}

/// Signature of the polyline through `points` (row-major, `dim` per point), no time channel.
inline TruncatedTensor points_signature(std::span<const double> points, int dim, int depth) {
    const std::size_t d = static_cast<std::size_t>(dim);
    if (dim < 1 || points.size() % d != 0 || points.size() < d)
        throw ShapeError("points_signature: need a whole number of points of width " + std::to_string(dim));
    TruncatedTensor sig = TruncatedTensor::unit(TensorShape(dim, depth));
    std::vector<double> inc(d);
    for (std::size_t i = d; i < points.size(); i += d) {
        for (std::size_t c = 0; c < d; ++c) inc[c] = points[i + c] - points[i - d + c];
        mul_segment_exp(sig, inc);
    }
    return sig;
}

inline LogSignature log_signature(const PiecewiseLinearPath& path, double a, double b, const LyndonBasis& basis) {
    if (basis.dim() != path.channels())
        throw ShapeError("basis alphabet " + std::to_string(basis.dim()) + " does not match path channels " +
                         std::to_string(path.channels()));
    TruncatedTensor sig = path_signature(path, a, b, basis.depth());
    return LogSignature{basis.dim(), basis.depth(), a, b, basis.compress(tensor_log(sig))};
}

inline LogSignature log_signature(const PiecewiseLinearPath& path, double a, double b, int depth) {
    return log_signature(path, a, b, LyndonBasis(path.channels(), depth));
}

/// r_i = t_{i*step}; the final interval ends at t_n and may be shorter.
inline std::vector<double> index_partition(const PiecewiseLinearPath& path, std::size_t step) {
    if (step == 0) throw DomainError("partition step must be >= 1");
    const std::vector<double>& t = path.times();
    std::vector<double> r;
    for (std::size_t i = 0; i < t.size() - 1; i += step) r.push_back(t[i]);
    r.push_back(t.back());
    return r;
}

inline void validate_partition(const PiecewiseLinearPath& path, std::span<const double> partition) {
    if (partition.size() < 2) throw DomainError("partition needs at least two points");
    for (std::size_t i = 0; i + 1 < partition.size(); ++i)
        if (!(partition[i] < partition[i + 1]))
            throw DomainError("partition not strictly increasing at index " + std::to_string(i + 1));
    if (partition.front() < path.start() || partition.back() > path.end())
        throw DomainError("partition outside the path domain");
}

inline LogSignatureStream logsig_stream(const PiecewiseLinearPath& path, std::span<const double> partition,
                                        const LyndonBasis& basis) {
    validate_partition(path, partition);
    LogSignatureStream stream;
    stream.dim = basis.dim();
    stream.depth = basis.depth();
    stream.partition.assign(partition.begin(), partition.end());
    stream.coords.reserve(partition.size() - 1);
    for (std::size_t i = 0; i + 1 < partition.size(); ++i)
        stream.coords.push_back(log_signature(path, partition[i], partition[i + 1], basis).coords);
    return stream;
}

inline LogSignatureStream logsig_stream(const PiecewiseLinearPath& path, std::span<const double> partition,
                                        int depth) {
    return logsig_stream(path, partition, LyndonBasis(path.channels(), depth));
}

/// Iterated integrals by nested trapezoidal sums on `substeps` uniform
/// sub-intervals of [a, b]. Independent of the Chen/exponential route; used
/// as a test oracle. Error is O(substeps^-2).
inline TruncatedTensor brute_force_signature(const PiecewiseLinearPath& path, double a, double b, int depth,
                                             std::size_t substeps) {
    detail::check_interval(path, a, b);
    if (substeps < 1) throw DomainError("brute_force_signature needs substeps >= 1");
    const TensorShape shape(path.channels(), depth);
    const std::size_t d = static_cast<std::size_t>(shape.dim);
    TruncatedTensor cur = TruncatedTensor::unit(shape);
    TruncatedTensor nxt = cur;
    std::vector<double> x0 = path.at(a);
    std::vector<double> dx(d);
    for (std::size_t j = 0; j < substeps; ++j) {
        const double t1 = (j + 1 == substeps) ? b : a + (b - a) * static_cast<double>(j + 1) / substeps;
        std::vector<double> x1 = path.at(t1);
        for (std::size_t c = 0; c < d; ++c) dx[c] = x1[c] - x0[c];
        for (int k = 1; k <= depth; ++k) {
            std::span<const double> old_prev = cur.level(k - 1);
            std::span<const double> new_prev = nxt.level(k - 1);
            std::span<const double> old_k = cur.level(k);
            std::span<double> out = nxt.level(k);
            for (std::size_t i = 0; i < old_prev.size(); ++i) {
                const double mid = 0.5 * (old_prev[i] + new_prev[i]);
                for (std::size_t c = 0; c < d; ++c) out[i * d + c] = old_k[i * d + c] + mid * dx[c];
            }
        }
        std::swap(cur, nxt);
        x0 = std::move(x1);
    }
    return cur;
}

}  // namespace nrde
