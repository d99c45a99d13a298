#pragma once

// Test-side oracles, independent of the library's differentiation and linear
// algebra paths.

#include "fadelab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace fadelab::testing {

// Central finite differences of `loss` with respect to every entry of every
// parameter in `params`. `loss` must be a pure function of the store.
inline GradMap finite_difference_grads(ParamStore& params, const std::function<double()>& loss,
                                       double step = 1e-5) {
    GradMap grads;
    for (auto& p : params.items()) {
        Tensor2 g(p.value.rows(), p.value.cols());
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value.raw()[i];
            p.value.raw()[i] = saved + step;
            const double up = loss();
            p.value.raw()[i] = saved - step;
            const double down = loss();
            p.value.raw()[i] = saved;
            g.raw()[i] = (up - down) / (2.0 * step);
        }
        grads.emplace(p.name, std::move(g));
    }
    return grads;
}

// Relative error between gradient maps: ||a - b|| / max(||b||, floor).
inline double grad_relative_error(const GradMap& analytic, const GradMap& reference,
                                  double floor = 1e-10) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& [name, ref] : reference) {
        const Tensor2& ana = analytic.at(name);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const double d = ana.raw()[i] - ref.raw()[i];
            num += d * d;
            den += ref.raw()[i] * ref.raw()[i];
        }
    }
    return std::sqrt(num) / std::max(std::sqrt(den), floor);
}

// Singular values by one-sided Jacobi rotations; descending order.
inline std::vector<double> singular_values(const Tensor2& m) {
    // Work on columns of a copy (rows if wide, via transpose).
    Tensor2 a = m.rows() >= m.cols() ? m : transpose(m);
    const std::size_t rows = a.rows();
    const std::size_t cols = a.cols();
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    app += a(i, p) * a(i, p);
                    aqq += a(i, q) * a(i, q);
                    apq += a(i, p) * a(i, q);
                }
                off = std::max(off, std::abs(apq));
                if (std::abs(apq) < 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double vip = a(i, p);
                    const double viq = a(i, q);
                    a(i, p) = c * vip - s * viq;
                    a(i, q) = s * vip + c * viq;
                }
            }
        }
        if (off < 1e-15) break;
    }
    std::vector<double> sv(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += a(i, j) * a(i, j);
        sv[j] = std::sqrt(acc);
    }
    std::sort(sv.begin(), sv.end(), std::greater<double>());
    return sv;
}

} // namespace fadelab::testing
