#pragma once

// Truncated tensor algebra T^N(R^d).
//
// Coefficients are stored densely, level-major: level 0 (one scalar), then
// level 1 (d entries), ..., level N (d^N entries). Inside a level, words
// (i1,...,ik) are in lexicographic order with i1 most significant, so the
// flat index of a word is its base-d value. Concatenating a level-k word u
// with a level-l word v gives index(u) * d^l + index(v).
//
// This layout is also the on-disk/CSV order of a flattened tensor.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nrde/errors.hpp"

namespace nrde {

struct TensorShape {
    int dim = 1;    // alphabet size d
    int depth = 1;  // truncation depth N

    TensorShape() = default;
    TensorShape(int d, int n) : dim(d), depth(n) {
        if (d < 1 || n < 1)
            throw DomainError("tensor shape needs d >= 1 and N >= 1, got d=" + std::to_string(d) +
                              " N=" + std::to_string(n));
    }

    std::size_t level_size(int k) const {
        std::size_t s = 1;
        for (int i = 0; i < k; ++i) s *= static_cast<std::size_t>(dim);
        return s;
    }
    std::size_t level_offset(int k) const {
        std::size_t off = 0;
        for (int i = 0; i < k; ++i) off += level_size(i);
        return off;
    }
    /// Sum of d^k for k = 0..N.
    std::size_t size() const { return level_offset(depth + 1); }

    bool operator==(const TensorShape&) const = default;
};

inline std::string to_string(const TensorShape& s) {
    return "(d=" + std::to_string(s.dim) + ", N=" + std::to_string(s.depth) + ")";
}

class TruncatedTensor {
public:
    TruncatedTensor() = default;
    explicit TruncatedTensor(TensorShape shape) : shape_(shape), coeffs_(shape.size(), 0.0) {}
    TruncatedTensor(TensorShape shape, std::vector<double> coeffs) : shape_(shape), coeffs_(std::move(coeffs)) {
        if (coeffs_.size() != shape_.size())
            throw ShapeError("coefficient count " + std::to_string(coeffs_.size()) + " does not match shape " +
                             to_string(shape_) + " (expected " + std::to_string(shape_.size()) + ")");
    }

    static TruncatedTensor zero(TensorShape shape) { return TruncatedTensor(shape); }
    static TruncatedTensor unit(TensorShape shape) {
        TruncatedTensor t(shape);
        t.coeffs_[0] = 1.0;
        return t;
    }
    /// Tensor with the given vector at level 1 and zeros elsewhere.
    static TruncatedTensor from_level1(TensorShape shape, std::span<const double> v) {
        if (v.size() != static_cast<std::size_t>(shape.dim))
            throw ShapeError("level-1 vector has " + std::to_string(v.size()) + " entries, shape has d=" +
                             std::to_string(shape.dim));
        TruncatedTensor t(shape);
        for (std::size_t i = 0; i < v.size(); ++i) t.coeffs_[1 + i] = v[i];
        return t;
    }

    const TensorShape& shape() const noexcept { return shape_; }
    int dim() const noexcept { return shape_.dim; }
    int depth() const noexcept { return shape_.depth; }

    double scalar() const { return coeffs_[0]; }
    double& scalar() { return coeffs_[0]; }

    std::span<const double> level(int k) const {
        check_level(k);
        return {coeffs_.data() + shape_.level_offset(k), shape_.level_size(k)};
    }
    std::span<double> level(int k) {
        check_level(k);
        return {coeffs_.data() + shape_.level_offset(k), shape_.level_size(k)};
    }

    std::span<const double> coeffs() const noexcept { return coeffs_; }
    std::span<double> coeffs() noexcept { return coeffs_; }
    std::size_t size() const noexcept { return coeffs_.size(); }

    /// Coefficient of a word given as 0-based letters.
    double at(std::span<const int> word) const { return coeffs_[flat_index(word)]; }
    double& at(std::span<const int> word) { return coeffs_[flat_index(word)]; }
    double at(std::initializer_list<int> word) const {
        return at(std::span<const int>(word.begin(), word.size()));
    }

    std::size_t flat_index(std::span<const int> word) const {
        const int k = static_cast<int>(word.size());
        check_level(k);
        std::size_t idx = 0;
        for (int letter : word) {
            if (letter < 0 || letter >= shape_.dim)
                throw DomainError("letter " + std::to_string(letter) + " outside alphabet of size " +
                                  std::to_string(shape_.dim));
            idx = idx * static_cast<std::size_t>(shape_.dim) + static_cast<std::size_t>(letter);
        }
        return shape_.level_offset(k) + idx;
    }

    TruncatedTensor& operator+=(const TruncatedTensor& o) {
        require_same_shape(*this, o, "tensor_add");
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
        return *this;
    }
    TruncatedTensor& operator-=(const TruncatedTensor& o) {
        require_same_shape(*this, o, "tensor_sub");
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
        return *this;
    }
    TruncatedTensor& operator*=(double s) {
        for (double& c : coeffs_) c *= s;
        return *this;
    }

    /// Euclidean norm of the flattened coefficient vector.
    double norm() const {
        double s = 0.0;
        for (double c : coeffs_) s += c * c;
        return std::sqrt(s);
    }

    friend void require_same_shape(const TruncatedTensor& a, const TruncatedTensor& b, const char* op) {
        if (a.shape_ != b.shape_)
            throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape_) + " vs " +
                             to_string(b.shape_));
    }

private:
    void check_level(int k) const {
        if (k < 0 || k > shape_.depth)
            throw DomainError("level " + std::to_string(k) + " outside 0.." + std::to_string(shape_.depth));
    }

    TensorShape shape_;
    std::vector<double> coeffs_;
};

inline TruncatedTensor tensor_add(const TruncatedTensor& a, const TruncatedTensor& b) {
    TruncatedTensor c = a;
    c += b;
    return c;
}

inline TruncatedTensor operator+(const TruncatedTensor& a, const TruncatedTensor& b) { return tensor_add(a, b); }
inline TruncatedTensor operator-(const TruncatedTensor& a, const TruncatedTensor& b) {
    TruncatedTensor c = a;
    c -= b;
    return c;
}
inline TruncatedTensor operator*(double s, const TruncatedTensor& a) {
    TruncatedTensor c = a;
    c *= s;
    return c;
}

/// Truncated product: c_n = sum_{k=0..n} a_k (x) b_{n-k}, for n <= N.
inline TruncatedTensor tensor_mul(const TruncatedTensor& a, const TruncatedTensor& b) {
    require_same_shape(a, b, "tensor_mul");
    const TensorShape& sh = a.shape();
    TruncatedTensor c(sh);
    for (int n = 0; n <= sh.depth; ++n) {
        std::span<double> cn = c.level(n);
        for (int k = 0; k <= n; ++k) {
            std::span<const double> ak = a.level(k);
            std::span<const double> bl = b.level(n - k);
            const std::size_t bl_size = bl.size();
            for (std::size_t i = 0; i < ak.size(); ++i) {
                const double ai = ak[i];
                if (ai == 0.0) continue;
                double* out = cn.data() + i * bl_size;
                for (std::size_t j = 0; j < bl_size; ++j) out[j] += ai * bl[j];
            }
        }
    }
    return c;
}

inline TruncatedTensor operator*(const TruncatedTensor& a, const TruncatedTensor& b) { return tensor_mul(a, b); }

/// Truncated exponential series. Requires a zero scalar part.
inline TruncatedTensor tensor_exp(const TruncatedTensor& a) {
    if (a.scalar() != 0.0)
        throw DomainError("tensor_exp requires a zero scalar part, got " + std::to_string(a.scalar()));
    const int depth = a.depth();
    // Horner: 1 + a(1 + a/2(1 + a/3(...)))
    TruncatedTensor result = TruncatedTensor::unit(a.shape());
    for (int k = depth; k >= 1; --k) {
        TruncatedTensor term = tensor_mul(a, result);
        term *= 1.0 / k;
        term.scalar() += 1.0;
        result = std::move(term);
    }
    return result;
}

/// log(a) = log(a0) + sum_{n=1..N} ((-1)^n / n) (1 - a/a0)^n, truncated at level N.
inline TruncatedTensor tensor_log(const TruncatedTensor& a) {
    const double a0 = a.scalar();
    if (!(a0 > 0.0)) throw DomainError("tensor_log requires a positive scalar part, got " + std::to_string(a0));
    const int depth = a.depth();
    TruncatedTensor x = (-1.0 / a0) * a;
    x.scalar() = 0.0;  // x = 1 - a/a0, log a = log a0 - sum x^n / n
    TruncatedTensor result(a.shape());
    TruncatedTensor power = x;
    for (int n = 1; n <= depth; ++n) {
        const double coef = -1.0 / n;
        for (std::size_t i = 0; i < result.size(); ++i) result.coeffs()[i] += coef * power.coeffs()[i];
        if (n < depth) power = tensor_mul(power, x);
    }
    result.scalar() = std::log(a0);
    return result;
}

/// Copy of the level-k block.
inline std::vector<double> project_level(const TruncatedTensor& a, int k) {
    std::span<const double> lv = a.level(k);
    return {lv.begin(), lv.end()};
}

/// Drop levels above `depth` (depth <= a.depth()).
inline TruncatedTensor truncate(const TruncatedTensor& a, int depth) {
    if (depth < 1 || depth > a.depth())
        throw DomainError("truncate: depth " + std::to_string(depth) + " outside 1.." + std::to_string(a.depth()));
    TensorShape sh(a.dim(), depth);
    std::vector<double> c(a.coeffs().begin(), a.coeffs().begin() + static_cast<std::ptrdiff_t>(sh.size()));
    return TruncatedTensor(sh, std::move(c));
}

}  // namespace nrde
