#include <cmath>

#include "doctest.h"
#include "gapweaver/errors.hpp"
#include "gapweaver/jacobian.hpp"
#include "helpers.hpp"

using namespace gapweaver;

namespace {

CMEField converged_bii(double Omega, double D, double dy) {
    const auto& c = testutil::example_coeffs();
    return solve_class(CmeClass::Bii, Omega, c, D, dy, {1e-11, 50, 4}, 5);
}

}  // namespace

TEST_CASE("assembled Jacobian is symmetric and annihilates the gauge direction") {
    const auto& c = testutil::example_coeffs();
    CMEField f = make_class_seed(CmeClass::A_m0, 1.3, c, 10.0, 0.3);
    solve_cme_newton(f, {1e-12, 50, 4});
    LinearizedOperator op = assemble_jacobian(f);
    CHECK(op.symmetry_defect <= 1e-12 * op.J.coeffs().cwiseAbs().maxCoeff());

    Eigen::MatrixXd K = kernel_candidates(f, op);
    const double scale = amplitude_measure(f);
    // gauge direction iA: exact discrete kernel at a converged field
    CHECK((op.J * K.col(2)).cwiseAbs().maxCoeff() <= 1e-10 * scale);

    SUBCASE("translation kernel residual is discretization-small") {
        const double r1 = (op.J * K.col(0)).cwiseAbs().maxCoeff();
        CMEField f2 = make_class_seed(CmeClass::A_m0, 1.3, c, 10.0, 0.15);
        solve_cme_newton(f2, {1e-12, 50, 4});
        LinearizedOperator op2 = assemble_jacobian(f2);
        Eigen::MatrixXd K2 = kernel_candidates(f2, op2);
        const double r2 = (op2.J * K2.col(0)).cwiseAbs().maxCoeff();
        CHECK(r1 / r2 > 4.0);  // at least the O(dy^2) contract
        CHECK(r1 <= 1.0 * f.dy * f.dy * scale);
    }
}

TEST_CASE("zero field: spectrum matches the analytic Dirichlet symbols") {
    const auto& c = testutil::example_coeffs();
    CMEField f;
    f.n = 25;
    f.D = 6.0;
    f.dy = 2.0 * f.D / (f.n - 1);
    f.omega = 1.5;
    f.sigma = -1;
    f.cls = CmeClass::Bii;
    f.coeffs = c;
    for (auto& compv : f.a) compv = Eigen::VectorXcd::Zero(f.cells());
    LinearizedOperator op = assemble_jacobian(f);

    auto lanczos = smallest_eigs(op.J, 4);
    auto dense = smallest_eigs_dense(op.J, 4);
    REQUIRE(lanczos.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(lanczos[i].value == doctest::Approx(dense[i]).epsilon(1e-9));
        CHECK(lanczos[i].residual <= 1e-8);
    }

    // continuum symbol: Omega - beta1 + alpha1 mu_i + alpha2 mu_j over the
    // Dirichlet Laplacian modes mu = -(pi k / 2D)^2
    double best = 1e300;
    for (int k1 = 1; k1 <= 6; ++k1)
        for (int k2 = 1; k2 <= 6; ++k2) {
            const double mu1 = std::pow(M_PI * k1 / (2 * f.D), 2);
            const double mu2 = std::pow(M_PI * k2 / (2 * f.D), 2);
            best = std::min(best,
                            std::abs(f.omega - c.beta1 - c.alpha1 * mu1 - c.alpha2 * mu2));
        }
    CHECK(std::abs(lanczos[0].value) == doctest::Approx(best).epsilon(0.08));
}

TEST_CASE("block diagonalization reproduces the full spectrum (dense oracle)") {
    CMEField f = converged_bii(2.05, 9.0, 0.6);  // small instance, N ~ 31
    REQUIRE(f.n <= 33);
    LinearizedOperator op = assemble_jacobian(f);
    JacobianBlocks blocks = block_diagonalize(op, f.cls);

    Eigen::MatrixXd full(op.J);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ef(full, Eigen::EigenvaluesOnly);
    Eigen::MatrixXd bp(blocks.plus), bm(blocks.minus);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ep(bp, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(bm, Eigen::EigenvaluesOnly);
    std::vector<double> merged;
    for (auto v : ep.eigenvalues()) merged.push_back(v);
    for (auto v : em.eigenvalues()) merged.push_back(v);
    std::sort(merged.begin(), merged.end());
    REQUIRE(static_cast<Eigen::Index>(merged.size()) == ef.eigenvalues().size());
    const double scale = std::abs(ef.eigenvalues()[0]);
    for (Eigen::Index i = 0; i < ef.eigenvalues().size(); ++i)
        CHECK(merged[i] == doctest::Approx(ef.eigenvalues()[i]).epsilon(0).scale(scale).epsilon(1e-10));
}

TEST_CASE("B-iv cannot be block-diagonalized") {
    const auto& c = testutil::example_coeffs();
    CMEField f = make_class_seed(CmeClass::Biv, 1.6, c, 8.0, 0.5);
    LinearizedOperator op = assemble_jacobian(f);
    CHECK_THROWS_AS(block_diagonalize(op, CmeClass::Biv), NotBlockDiagonalizable);
}

TEST_CASE("kernel report shortcuts") {
    const auto& c = testutil::example_coeffs();
    SUBCASE("zero field gives a negative verdict") {
        CMEField f;
        f.n = 33;
        f.D = 6.0;
        f.dy = 2.0 * f.D / (f.n - 1);
        f.omega = 1.5;
        f.cls = CmeClass::Bii;
        f.coeffs = c;
        f.sigma = -1;
        for (auto& compv : f.a) compv = Eigen::VectorXcd::Zero(f.cells());
        auto rep = kernel_report(f, {6.0});
        CHECK_FALSE(rep.verdict);
    }
    SUBCASE("one-component ground state verdict is analytic") {
        CMEField f = make_class_seed(CmeClass::A_m0, 1.3, c, 8.0, 0.4);
        solve_cme_newton(f, {1e-10, 50, 4});
        auto rep = kernel_report(f, {8.0});
        CHECK(rep.verdict);
        CHECK_FALSE(rep.computed);
    }
}

TEST_CASE("kernel diagnostics on a small coupled instance") {
    // structural check at unit-test scale: three near-zero eigenvalues with
    // the candidates spanning them (quantitative limits are acceptance work)
    CMEField f = converged_bii(1.8, 10.0, 0.25);
    auto rep = kernel_report(f, {7.0, 10.0}, {1e-11, 50, 4});
    REQUIRE(rep.rows.size() == 2);
    for (int j = 0; j < 3; ++j)
        CHECK(std::abs(rep.rows[1].eigs[j]) < std::abs(rep.rows[0].eigs[j]) + 1e-12);
    CHECK(std::abs(rep.rows[1].eigs[3]) > 5.0 * std::abs(rep.rows[1].eigs[2]));
    CHECK(rep.rows[1].subspace_angle < 0.05);
    CHECK(rep.verdict);
}
