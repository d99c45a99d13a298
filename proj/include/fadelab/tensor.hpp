#pragma once

#include "fadelab/error.hpp"
#include "fadelab/kernels.hpp"
#include "fadelab/rng.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace fadelab {

// Dense row-major matrix of doubles. Row and column vectors are 1 x n / n x 1.
class Tensor2 {
public:
    Tensor2() = default;
    Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor2(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        require(data_.size() == rows_ * cols_, ErrorKind::shape,
                "data length " + std::to_string(data_.size()) + " does not match " + shape_str());
    }

    static Tensor2 row(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor2(1, n, std::move(values));
    }
    static Tensor2 column(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor2(n, 1, std::move(values));
    }
    static Tensor2 identity(std::size_t n) {
        Tensor2 t(n, n);
        for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }
    static Tensor2 randn(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0) {
        Tensor2 t(rows, cols);
        for (double& v : t.data_) v = stddev * rng.normal();
        return t;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::vector<double>& raw() noexcept { return data_; }
    const std::vector<double>& raw() const noexcept { return data_; }

    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }

    bool same_shape(const Tensor2& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    bool all_finite() const noexcept {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Tensor2& a, const Tensor2& b, const char* op) {
    require(a.same_shape(b), ErrorKind::shape,
            std::string(op) + ": shapes " + a.shape_str() + " and " + b.shape_str() + " differ");
}

inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    require(a.cols() == b.rows(), ErrorKind::shape,
            "matmul: inner dimensions differ, " + a.shape_str() + " vs " + b.shape_str());
    Tensor2 c(a.rows(), b.cols());
    kernels::active().gemm(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
    return c;
}

inline Tensor2 add(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "add");
    Tensor2 c(a.rows(), a.cols());
    kernels::active().add(a.data(), b.data(), c.data(), a.size());
    return c;
}

inline Tensor2 sub(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "sub");
    Tensor2 c(a.rows(), a.cols());
    kernels::active().sub(a.data(), b.data(), c.data(), a.size());
    return c;
}

inline Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "hadamard");
    Tensor2 c(a.rows(), a.cols());
    kernels::active().mul(a.data(), b.data(), c.data(), a.size());
    return c;
}

inline Tensor2 scaled(double a, const Tensor2& x) {
    Tensor2 c(x.rows(), x.cols());
    kernels::active().scale(a, x.data(), c.data(), x.size());
    return c;
}

inline double dot(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "dot");
    return kernels::active().dot(a.data(), b.data(), a.size());
}

inline double sum_all(const Tensor2& a) { return kernels::active().sum(a.data(), a.size()); }

inline double sumsq(const Tensor2& a) { return kernels::active().dot(a.data(), a.data(), a.size()); }

inline double frobenius_norm(const Tensor2& a) { return std::sqrt(sumsq(a)); }

inline Tensor2 transpose(const Tensor2& a) {
    Tensor2 t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

inline double max_abs_diff(const Tensor2& a, const Tensor2& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.raw()[i] - b.raw()[i]));
    }
    return m;
}

} // namespace fadelab
