#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "gapweaver/kernels.hpp"

using namespace gapweaver;
using cd = std::complex<double>;

namespace {

std::vector<cd> wave_field(int n, double h) {
    std::vector<cd> f(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double x = i * h, y = j * h;
            f[i * n + j] = cd(std::sin(0.7 * x) * std::cos(0.4 * y), 0.1 * std::sin(x + y));
        }
    return f;
}

double max_diff(const std::vector<cd>& a, const std::vector<cd>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("stencil: OpenMP matches the serial reference bit for bit") {
    const int n = 67;
    const double h = 0.11;
    auto in = wave_field(n, h);
    std::vector<cd> o1(in.size()), o2(in.size());
    for (int order : {2, 4}) {
        stencil_apply(o1.data(), in.data(), n, 1.3, -4.7, h, order);
        stencil_apply_serial(o2.data(), in.data(), n, 1.3, -4.7, h, order);
        CHECK(max_diff(o1, o2) == 0.0);
    }
}

TEST_CASE("stencil: convergence order on a smooth field") {
    // apply to sin(a x) sin(b y) on an interior patch and compare with the
    // analytic anisotropic Laplacian
    auto err_at = [&](int n, int order) {
        const double L = 6.0, h = L / (n - 1);
        std::vector<cd> in(static_cast<std::size_t>(n) * n), out(in.size());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                in[i * n + j] = std::sin(1.1 * i * h) * std::sin(0.9 * j * h);
        stencil_apply(out.data(), in.data(), n, 2.0, 0.5, h, order);
        double worst = 0;
        for (int i = n / 4; i < 3 * n / 4; ++i)
            for (int j = n / 4; j < 3 * n / 4; ++j) {
                double exact = -(2.0 * 1.1 * 1.1 + 0.5 * 0.9 * 0.9) *
                               std::sin(1.1 * i * h) * std::sin(0.9 * j * h);
                worst = std::max(worst, std::abs(out[i * n + j] - cd(exact)));
            }
        return worst;
    };
    for (int order : {2, 4}) {
        double e1 = err_at(65, order), e2 = err_at(129, order);
        double rate = std::log2(e1 / e2);
        CHECK(rate > order - 0.4);
        CHECK(rate < order + 0.6);
    }
}

TEST_CASE("cubic coupling and RK4 step: parallel vs serial") {
    const int n = 41;
    auto a1 = wave_field(n, 0.2), a2 = wave_field(n, 0.3), a3 = wave_field(n, 0.15);
    CmeCubicCoeffs c{9.5e-3, 4.5e-3, 3.8e-3, 1.6e-2, -1};
    std::vector<cd> o1(a1.size()), o2(a1.size()), o3(a1.size());
    std::vector<cd> s1(a1.size()), s2(a1.size()), s3(a1.size());
    cme_cubic({o1.data(), o2.data(), o3.data()}, {a1.data(), a2.data(), a3.data()},
              static_cast<int>(a1.size()), c);
    cme_cubic_serial({s1.data(), s2.data(), s3.data()}, {a1.data(), a2.data(), a3.data()},
                     static_cast<int>(a1.size()), c);
    CHECK(max_diff(o1, s1) == 0.0);
    CHECK(max_diff(o2, s2) == 0.0);
    CHECK(max_diff(o3, s3) == 0.0);

    auto b1 = a1, b2 = a2, b3 = a3;
    cme_cubic_rk4_step({a1.data(), a2.data(), a3.data()}, static_cast<int>(a1.size()), c,
                       0.01);
    cme_cubic_rk4_step_serial({b1.data(), b2.data(), b3.data()},
                              static_cast<int>(b1.size()), c, 0.01);
    CHECK(max_diff(a1, b1) == 0.0);

    SUBCASE("pointwise flow conserves |A1|^2+|A2|^2+|A3|^2") {
        for (std::size_t i = 0; i < a1.size(); i += 37) {
            double before = std::norm(b1[i]) + std::norm(b2[i]) + std::norm(b3[i]);
            cd x1 = b1[i], x2 = b2[i], x3 = b3[i];
            std::vector<cd> v1{x1}, v2{x2}, v3{x3};
            for (int s = 0; s < 100; ++s)
                cme_cubic_rk4_step_serial({v1.data(), v2.data(), v3.data()}, 1, c, 0.01);
            double after = std::norm(v1[0]) + std::norm(v2[0]) + std::norm(v3[0]);
            CHECK(after == doctest::Approx(before).epsilon(1e-10));
        }
    }
}

TEST_CASE("phase step and reductions: parallel vs serial") {
    const int n = 53;
    auto e1 = wave_field(n, 0.17);
    auto e2 = e1;
    std::vector<double> V(e1.size());
    for (std::size_t i = 0; i < V.size(); ++i) V[i] = 0.3 * std::cos(0.02 * i);
    gp_phase_step(e1.data(), V.data(), static_cast<int>(e1.size()), -1, 3e-3);
    gp_phase_step_serial(e2.data(), V.data(), static_cast<int>(e2.size()), -1, 3e-3);
    CHECK(max_diff(e1, e2) == 0.0);
    // modulus preserved exactly by construction
    for (std::size_t i = 0; i < e1.size(); i += 101) {
        auto orig = wave_field(n, 0.17)[i];
        CHECK(std::abs(e1[i]) == doctest::Approx(std::abs(orig)).epsilon(1e-14));
    }

    CHECK(max_abs(e1.data(), static_cast<int>(e1.size())) ==
          max_abs_serial(e1.data(), static_cast<int>(e1.size())));
    CHECK(dot(V.data(), V.data(), static_cast<int>(V.size())) ==
          doctest::Approx(dot_serial(V.data(), V.data(), static_cast<int>(V.size())))
              .epsilon(1e-14));
}

TEST_CASE("elliptic kernels: parallel vs serial") {
    const int n = 49;
    const double h = 0.13;
    auto phi = wave_field(n, h);
    std::vector<double> V(phi.size()), vr(phi.size()), vo1(phi.size()), vo2(phi.size());
    for (std::size_t i = 0; i < V.size(); ++i) {
        V[i] = 0.2 + 0.1 * std::sin(0.05 * i);
        vr[i] = std::cos(0.03 * i);
    }
    std::vector<cd> r1(phi.size()), r2(phi.size());
    elliptic_residual_kernel(r1.data(), phi.data(), V.data(), n, 0.7, 1, h);
    elliptic_residual_kernel_serial(r2.data(), phi.data(), V.data(), n, 0.7, 1, h);
    CHECK(max_diff(r1, r2) == 0.0);

    elliptic_jacobian_apply(vo1.data(), vr.data(), V.data(), n, h);
    elliptic_jacobian_apply_serial(vo2.data(), vr.data(), V.data(), n, h);
    for (std::size_t i = 0; i < vo1.size(); ++i) CHECK(vo1[i] == vo2[i]);
}
