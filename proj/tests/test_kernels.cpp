#include "fadelab/error.hpp"
#include "fadelab/kernels.hpp"
#include "fadelab/rng.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <string>
#include <vector>

using namespace fadelab;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-30);
}

} // namespace

TEST_CASE("every available backend matches the scalar reference") {
    const auto& ref = kernels::scalar_backend();
    Rng rng(42);

    // Shapes chosen to exercise the SIMD tails.
    const std::vector<std::array<std::size_t, 3>> shapes{
        {1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {13, 17, 9}, {64, 18, 128}, {5, 128, 2},
    };

    for (const auto* backend : kernels::available_backends()) {
        CAPTURE(backend->name);
        for (auto [m, k, n] : shapes) {
            auto a = random_vec(m * k, rng);
            auto b = random_vec(k * n, rng);
            std::vector<double> c_ref(m * n), c_test(m * n);
            ref.gemm(a.data(), b.data(), c_ref.data(), m, k, n);
            backend->gemm(a.data(), b.data(), c_test.data(), m, k, n);
            CHECK(rel_err(c_test, c_ref) < 1e-13);

            // c (k x n) += a^T b with a (m x k), b (m x n)
            auto b2 = random_vec(m * n, rng);
            std::vector<double> t_ref(k * n, 0.5), t_test(k * n, 0.5);
            ref.gemm_tn_acc(a.data(), b2.data(), t_ref.data(), m, k, n);
            backend->gemm_tn_acc(a.data(), b2.data(), t_test.data(), m, k, n);
            CHECK(rel_err(t_test, t_ref) < 1e-13);

            // c (m x n) += a b^T with a (m x k), b (n x k)
            auto b3 = random_vec(n * k, rng);
            std::vector<double> u_ref(m * n, -0.25), u_test(m * n, -0.25);
            ref.gemm_nt_acc(a.data(), b3.data(), u_ref.data(), m, k, n);
            backend->gemm_nt_acc(a.data(), b3.data(), u_test.data(), m, k, n);
            CHECK(rel_err(u_test, u_ref) < 1e-13);
        }

        for (std::size_t n : {1UL, 4UL, 7UL, 31UL, 1000UL}) {
            auto x = random_vec(n, rng);
            auto y = random_vec(n, rng);
            std::vector<double> z_ref(n), z_test(n);

            ref.add(x.data(), y.data(), z_ref.data(), n);
            backend->add(x.data(), y.data(), z_test.data(), n);
            CHECK(z_ref == z_test);

            ref.sub(x.data(), y.data(), z_ref.data(), n);
            backend->sub(x.data(), y.data(), z_test.data(), n);
            CHECK(z_ref == z_test);

            ref.mul(x.data(), y.data(), z_ref.data(), n);
            backend->mul(x.data(), y.data(), z_test.data(), n);
            CHECK(z_ref == z_test);

            ref.scale(1.7, x.data(), z_ref.data(), n);
            backend->scale(1.7, x.data(), z_test.data(), n);
            CHECK(z_ref == z_test);

            auto y_ref = y;
            auto y_test = y;
            ref.axpy(-0.3, x.data(), y_ref.data(), n);
            backend->axpy(-0.3, x.data(), y_test.data(), n);
            CHECK(rel_err(y_test, y_ref) < 1e-14);

            CHECK(backend->dot(x.data(), y.data(), n) ==
                  doctest::Approx(ref.dot(x.data(), y.data(), n)).epsilon(1e-13));
            CHECK(backend->sum(x.data(), n) == doctest::Approx(ref.sum(x.data(), n)).epsilon(1e-13));

            auto rows_ref = random_vec(3 * n, rng);
            auto rows_test = rows_ref;
            ref.add_bias_rows(rows_ref.data(), x.data(), 3, n);
            backend->add_bias_rows(rows_test.data(), x.data(), 3, n);
            CHECK(rows_ref == rows_test);
        }
    }
}

TEST_CASE("backend selection is hardware-aware") {
    const auto backends = kernels::available_backends();
    CHECK(backends.size() >= 1);
    CHECK(std::string(backends[0]->name) == "scalar");
    const std::string active_name = kernels::active().name;
    CHECK((active_name == "scalar" || active_name == "avx2"));
    if (kernels::avx2_supported()) {
        CHECK(backends.size() == 2);
    }
    CHECK_THROWS_AS(kernels::force_backend("neon"), Error);
}
