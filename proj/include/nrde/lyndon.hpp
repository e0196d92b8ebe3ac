#pragma once

// Lyndon words and the Lyndon basis of the truncated free Lie algebra.
//
// Words are stored with 0-based letters; they print 1-based ("12" is the
// word e1 e2). Basis order is by length, then lexicographic. This order is
// the coordinate order of every log-signature the library produces.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nrde/errors.hpp"
#include "nrde/tensor_algebra.hpp"

namespace nrde {

using Word = std::vector<int>;

namespace detail {

inline int moebius(int n) {
    int result = 1;
    for (int p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            n /= p;
            if (n % p == 0) return 0;
            result = -result;
        }
    }
    if (n > 1) result = -result;
    return result;
}

inline std::int64_t ipow(std::int64_t base, int exp) {
    std::int64_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

}  // namespace detail

/// Dimension of the depth-N truncated free Lie algebra over d letters:
/// sum_{k=1..N} (1/k) sum_{i | k} mu(k/i) d^i.
inline std::int64_t logsig_dim(int d, int depth) {
    if (d < 1 || depth < 1)
        throw DomainError("logsig_dim needs d >= 1 and N >= 1, got d=" + std::to_string(d) +
                          " N=" + std::to_string(depth));
    std::int64_t total = 0;
    for (int k = 1; k <= depth; ++k) {
        std::int64_t necklaces = 0;
        for (int i = 1; i <= k; ++i)
            if (k % i == 0) necklaces += detail::moebius(k / i) * detail::ipow(d, i);
        total += necklaces / k;  // exact: the inner sum is divisible by k
    }
    return total;
}

/// True if the word is strictly smaller than each of its proper rotations.
inline bool is_lyndon(std::span<const int> w) {
    const std::size_t n = w.size();
    if (n == 0) return false;
    for (std::size_t r = 1; r < n; ++r) {
        // compare w with rotation starting at r
        int cmp = 0;
        for (std::size_t i = 0; i < n && cmp == 0; ++i) {
            const int a = w[i];
            const int b = w[(r + i) % n];
            cmp = (a < b) ? -1 : (a > b ? 1 : 0);
        }
        if (cmp >= 0) return false;
    }
    return true;
}

inline std::string word_to_string(std::span<const int> w, int alphabet) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (alphabet > 9 && i > 0) s += ',';
        s += std::to_string(w[i] + 1);
    }
    return s;
}

/// Lyndon words of length 1..max_len over {0..d-1}, in (length, lex) order.
/// Duval's algorithm generates them lexicographically; we then bucket by length.
inline std::vector<Word> lyndon_words(int d, int max_len) {
    std::vector<std::vector<Word>> by_len(static_cast<std::size_t>(max_len) + 1);
    Word w{-1};
    while (!w.empty()) {
        ++w.back();
        const std::size_t m = w.size();
        by_len[m].push_back(w);
        // extend periodically to max_len
        while (w.size() < static_cast<std::size_t>(max_len)) w.push_back(w[w.size() - m]);
        while (!w.empty() && w.back() == d - 1) w.pop_back();
    }
    std::vector<Word> out;
    for (std::size_t k = 1; k < by_len.size(); ++k)
        for (auto& word : by_len[k]) out.push_back(std::move(word));
    return out;
}

/// Standard factorization w = u v, v the longest proper suffix that is Lyndon.
/// Returns the split position |u|. Requires |w| >= 2.
inline std::size_t standard_factorization(std::span<const int> w) {
    for (std::size_t split = 1; split < w.size(); ++split)
        if (is_lyndon(w.subspan(split))) return split;
    throw DomainError("standard_factorization: word has no proper Lyndon suffix");
}

class LyndonBasis {
public:
    LyndonBasis(int d, int depth) : shape_(d, depth) {
        words_ = lyndon_words(d, depth);
        brackets_.reserve(words_.size());
        for (const Word& w : words_) brackets_.push_back(bracket(w));
        triangular_ = check_triangular();
    }

    const TensorShape& shape() const noexcept { return shape_; }
    int dim() const noexcept { return shape_.dim; }
    int depth() const noexcept { return shape_.depth; }
    std::size_t size() const noexcept { return words_.size(); }
    const std::vector<Word>& words() const noexcept { return words_; }
    const Word& word(std::size_t i) const { return words_.at(i); }
    /// Expanded Lie bracket of word i as a tensor.
    const TruncatedTensor& bracketing(std::size_t i) const { return brackets_.at(i); }
    bool triangular() const noexcept { return triangular_; }

    std::size_t index_of(std::span<const int> w) const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (std::equal(words_[i].begin(), words_[i].end(), w.begin(), w.end())) return i;
        throw DomainError("word " + word_to_string(w, dim()) + " is not in the basis");
    }

    /// Sum of coords[i] * bracketing(i).
    TruncatedTensor expand(std::span<const double> coords) const {
        if (coords.size() != words_.size())
            throw ShapeError("expand: " + std::to_string(coords.size()) + " coordinates for a basis of size " +
                             std::to_string(words_.size()));
        TruncatedTensor t(shape_);
        for (std::size_t i = 0; i < words_.size(); ++i) {
            const double c = coords[i];
            if (c == 0.0) continue;
            const int k = static_cast<int>(words_[i].size());
            std::span<const double> src = brackets_[i].level(k);
            std::span<double> dst = t.level(k);
            for (std::size_t j = 0; j < src.size(); ++j) dst[j] += c * src[j];
        }
        return t;
    }

    /// Lyndon coordinates of a Lie element. Throws NotLieElementError if the
    /// reconstruction residual exceeds tol * (1 + |x|).
    std::vector<double> compress(const TruncatedTensor& x, double tol = 1e-9) const {
        if (x.shape() != shape_)
            throw ShapeError("compress: tensor shape " + to_string(x.shape()) + " vs basis shape " +
                             to_string(shape_));
        std::vector<double> coords = triangular_ ? compress_triangular(x) : compress_least_squares(x);
        const double residual = (expand(coords) - x).norm();
        if (residual > tol * (1.0 + x.norm())) throw NotLieElementError(residual);
        return coords;
    }

    /// Triangular solve. Each bracketing(w) is w plus words lexicographically
    /// after w, so processing Lyndon words in increasing order peels off one
    /// coordinate at a time.
    std::vector<double> compress_triangular(const TruncatedTensor& x) const {
        std::vector<double> coords(words_.size(), 0.0);
        TruncatedTensor residual = x;
        for (std::size_t i = 0; i < words_.size(); ++i) {
            const int k = static_cast<int>(words_[i].size());
            const double c = residual.at(std::span<const int>(words_[i]));
            coords[i] = c;
            if (c == 0.0) continue;
            std::span<const double> src = brackets_[i].level(k);
            std::span<double> dst = residual.level(k);
            for (std::size_t j = 0; j < src.size(); ++j) dst[j] -= c * src[j];
        }
        return coords;
    }

    /// Per-level least squares via normal equations; used when the triangular
    /// structure check fails.
    std::vector<double> compress_least_squares(const TruncatedTensor& x) const {
        std::vector<double> coords(words_.size(), 0.0);
        for (int k = 1; k <= depth(); ++k) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < words_.size(); ++i)
                if (static_cast<int>(words_[i].size()) == k) idx.push_back(i);
            const std::size_t m = idx.size();
            std::vector<double> gram(m * m, 0.0), rhs(m, 0.0);
            std::span<const double> xk = x.level(k);
            for (std::size_t a = 0; a < m; ++a) {
                std::span<const double> ba = brackets_[idx[a]].level(k);
                for (std::size_t j = 0; j < ba.size(); ++j) rhs[a] += ba[j] * xk[j];
                for (std::size_t b = 0; b <= a; ++b) {
                    std::span<const double> bb = brackets_[idx[b]].level(k);
                    double s = 0.0;
                    for (std::size_t j = 0; j < ba.size(); ++j) s += ba[j] * bb[j];
                    gram[a * m + b] = gram[b * m + a] = s;
                }
            }
            // Cholesky; the brackets are linearly independent so the Gram matrix is SPD.
            for (std::size_t j = 0; j < m; ++j) {
                double s = gram[j * m + j];
                for (std::size_t p = 0; p < j; ++p) s -= gram[j * m + p] * gram[j * m + p];
                const double diag = std::sqrt(s);
                gram[j * m + j] = diag;
                for (std::size_t i = j + 1; i < m; ++i) {
                    double t = gram[i * m + j];
                    for (std::size_t p = 0; p < j; ++p) t -= gram[i * m + p] * gram[j * m + p];
                    gram[i * m + j] = t / diag;
                }
            }
            std::vector<double> y(m);
            for (std::size_t i = 0; i < m; ++i) {
                double s = rhs[i];
                for (std::size_t p = 0; p < i; ++p) s -= gram[i * m + p] * y[p];
                y[i] = s / gram[i * m + i];
            }
            for (std::size_t ii = m; ii-- > 0;) {
                double s = y[ii];
                for (std::size_t p = ii + 1; p < m; ++p) s -= gram[p * m + ii] * coords[idx[p]];
                coords[idx[ii]] = s / gram[ii * m + ii];
            }
        }
        return coords;
    }

private:
    TruncatedTensor bracket(const Word& w) const {
        TruncatedTensor t(shape_);
        if (w.size() == 1) {
            t.level(1)[static_cast<std::size_t>(w[0])] = 1.0;
            return t;
        }
        const std::size_t split = standard_factorization(w);
        const TruncatedTensor left = bracket(Word(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(split)));
        const TruncatedTensor right = bracket(Word(w.begin() + static_cast<std::ptrdiff_t>(split), w.end()));
        // [P, Q] = P Q - Q P; both factors are homogeneous with zero scalar part
        return tensor_mul(left, right) - tensor_mul(right, left);
    }

    bool check_triangular() const {
        for (std::size_t i = 0; i < words_.size(); ++i) {
            const int k = static_cast<int>(words_[i].size());
            if (brackets_[i].at(std::span<const int>(words_[i])) != 1.0) return false;
            for (std::size_t j = 0; j < i; ++j)
                if (static_cast<int>(words_[j].size()) == k &&
                    brackets_[i].at(std::span<const int>(words_[j])) != 0.0)
                    return false;
        }
        return true;
    }

    TensorShape shape_;
    std::vector<Word> words_;
    std::vector<TruncatedTensor> brackets_;
    bool triangular_ = true;
};

inline LyndonBasis enumerate_lyndon(int d, int depth) { return LyndonBasis(d, depth); }

inline std::vector<double> compress(const TruncatedTensor& logsig_tensor, const LyndonBasis& basis) {
    return basis.compress(logsig_tensor);
}

inline TruncatedTensor expand(std::span<const double> coords, const LyndonBasis& basis) {
    return basis.expand(coords);
}

}  // namespace nrde
