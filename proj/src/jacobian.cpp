#include "gapweaver/jacobian.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "gapweaver/errors.hpp"

namespace gapweaver {

namespace {
using SpMat = Eigen::SparseMatrix<double>;
}

LinearizedOperator assemble_jacobian(const CMEField& f, const double* alpha_override) {
    RealifiedCmeSystem sys = assemble_cme_system(f, /*full_planes=*/true, alpha_override, 4);
    LinearizedOperator op;
    op.J = std::move(sys.J);
    op.planes = std::move(sys.planes);
    op.n = sys.n;
    op.m = sys.m;
    op.dy = f.dy;

    SpMat d = SpMat(op.J.transpose()) - op.J;
    op.symmetry_defect = d.coeffs().size() ? d.coeffs().cwiseAbs().maxCoeff() : 0.0;
    const double scale = op.J.coeffs().cwiseAbs().maxCoeff();
    if (op.symmetry_defect > 1e-12 * scale)
        throw NumericalFailure("realified Jacobian is not symmetric (assembly bug guard)",
                               op.symmetry_defect);
    return op;
}

Eigen::MatrixXd kernel_candidates(const CMEField& f, const LinearizedOperator& op) {
    const int m = op.m, n = op.n;
    const std::ptrdiff_t block = static_cast<std::ptrdiff_t>(m) * m;
    Eigen::MatrixXd K(static_cast<std::ptrdiff_t>(op.planes.size()) * block, 3);
    K.setZero();
    // 4th-order central first derivatives of the field (zero outside)
    auto dval = [&](const Eigen::VectorXcd& a, int i1, int i2, bool dir1) {
        auto v = [&](int j1, int j2) -> std::complex<double> {
            if (j1 < 0 || j2 < 0 || j1 >= n || j2 >= n) return {0.0, 0.0};
            return a[j1 * n + j2];
        };
        const double ih = 1.0 / (12.0 * f.dy);
        if (dir1)
            return (v(i1 - 2, i2) - 8.0 * v(i1 - 1, i2) + 8.0 * v(i1 + 1, i2) -
                    v(i1 + 2, i2)) * ih;
        return (v(i1, i2 - 2) - 8.0 * v(i1, i2 - 1) + 8.0 * v(i1, i2 + 1) - v(i1, i2 + 2)) *
               ih;
    };
    for (std::size_t p = 0; p < op.planes.size(); ++p) {
        auto [c, q] = op.planes[p];
        for (int i1 = 1; i1 <= m; ++i1)
            for (int i2 = 1; i2 <= m; ++i2) {
                const std::ptrdiff_t r = p * block + static_cast<std::ptrdiff_t>(i1 - 1) * m +
                                         (i2 - 1);
                auto d1 = dval(f.a[c], i1, i2, true);
                auto d2 = dval(f.a[c], i1, i2, false);
                const auto v = f.a[c][i1 * n + i2];
                K(r, 0) = (q == 0) ? d1.real() : d1.imag();
                K(r, 1) = (q == 0) ? d2.real() : d2.imag();
                // i A realified: Re -> -Im A, Im -> Re A
                K(r, 2) = (q == 0) ? -v.imag() : v.real();
            }
    }
    return K;
}

JacobianBlocks block_diagonalize(const LinearizedOperator& op, CmeClass cls) {
    if (cls != CmeClass::Bii && cls != CmeClass::Biii)
        throw NotBlockDiagonalizable("class " + std::string(class_tag(cls)) +
                                     " has to be treated in full");
    // plane selection: B-ii keeps (Re,Re)+(Im,Im); B-iii (Re1,Im2)+(Im1,Re2)
    std::vector<int> plus, minus;
    for (std::size_t p = 0; p < op.planes.size(); ++p) {
        auto [c, q] = op.planes[p];
        bool in_plus;
        if (cls == CmeClass::Bii)
            in_plus = (q == 0);
        else
            in_plus = (c == 0) ? (q == 0) : (q == 1);
        (in_plus ? plus : minus).push_back(static_cast<int>(p));
    }
    const std::ptrdiff_t block = static_cast<std::ptrdiff_t>(op.m) * op.m;
    const auto dofs_of = [&](const std::vector<int>& planes) {
        return static_cast<std::ptrdiff_t>(planes.size()) * block;
    };
    // map global dof -> (side, local dof)
    std::vector<int> side(op.planes.size()), local(op.planes.size());
    for (std::size_t i = 0; i < plus.size(); ++i) {
        side[plus[i]] = 0;
        local[plus[i]] = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < minus.size(); ++i) {
        side[minus[i]] = 1;
        local[minus[i]] = static_cast<int>(i);
    }

    std::vector<Eigen::Triplet<double>> tp, tm;
    double cross = 0.0;
    for (int k = 0; k < op.J.outerSize(); ++k)
        for (SpMat::InnerIterator it(op.J, k); it; ++it) {
            const int pr = static_cast<int>(it.row() / block);
            const int pc = static_cast<int>(it.col() / block);
            if (side[pr] != side[pc]) {
                cross = std::max(cross, std::abs(it.value()));
                continue;
            }
            const auto r = local[pr] * block + it.row() % block;
            const auto c = local[pc] * block + it.col() % block;
            if (side[pr] == 0)
                tp.emplace_back(r, c, it.value());
            else
                tm.emplace_back(r, c, it.value());
        }
    const double scale = op.J.coeffs().cwiseAbs().maxCoeff();
    if (cross > 1e-10 * scale)
        throw NotBlockDiagonalizable(
            "field is not real after the class phase rotation; cross-block weight " +
            std::to_string(cross));

    JacobianBlocks out;
    out.plus.resize(dofs_of(plus), dofs_of(plus));
    out.plus.setFromTriplets(tp.begin(), tp.end());
    out.minus.resize(dofs_of(minus), dofs_of(minus));
    out.minus.setFromTriplets(tm.begin(), tm.end());
    out.plus_planes = plus;
    out.minus_planes = minus;
    return out;
}

std::vector<EigResult> smallest_eigs(const SpMat& J, int count, double shift) {
    const auto n = J.rows();
    Eigen::SparseLU<SpMat> lu;
    SpMat A = J;
    if (shift != 0.0) {
        SpMat I(n, n);
        I.setIdentity();
        A = J - shift * I;
    }
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) {
        // exact eigenvalue hit: perturb the shift and retry
        const double bump = 1e-8 * (1.0 + std::abs(shift));
        SpMat I(n, n);
        I.setIdentity();
        A = J - (shift + bump) * I;
        lu.factorize(A);
        if (lu.info() != Eigen::Success)
            throw SingularSystem("shift-invert factorization failed twice");
        shift += bump;
    }

    // Lanczos on (J - shift)^{-1} with full reorthogonalization
    const int max_steps = std::min<Eigen::Index>(n, 220);
    std::vector<Eigen::VectorXd> V;
    std::vector<double> alpha, beta;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    // deterministic start vector
    for (Eigen::Index i = 0; i < n; ++i) v[i] = std::sin(0.7 * (i + 1)) + 0.3;
    v.normalize();
    V.push_back(v);

    std::vector<EigResult> out;
    Eigen::VectorXd w;
    for (int k = 0; k < max_steps; ++k) {
        w = lu.solve(V[k]);
        if (k > 0) w -= beta[k - 1] * V[k - 1];
        alpha.push_back(w.dot(V[k]));
        w -= alpha[k] * V[k];
        for (const auto& q : V) w -= q.dot(w) * q;  // full reorthogonalization
        const double b = w.norm();
        const bool breakdown = (b < 1e-13);

        if (k >= std::max(2 * count, 8) || k == max_steps - 1 || breakdown) {
            // Ritz extraction
            const int kk = k + 1;
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(kk, kk);
            for (int i = 0; i < kk; ++i) {
                T(i, i) = alpha[i];
                if (i + 1 < kk) {
                    T(i, i + 1) = beta.size() > static_cast<std::size_t>(i) ? beta[i] : 0.0;
                    T(i + 1, i) = T(i, i + 1);
                }
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
            // sort by |theta| descending: largest in magnitude of the inverse
            std::vector<int> order(kk);
            for (int i = 0; i < kk; ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](int a2, int b2) {
                return std::abs(es.eigenvalues()[a2]) > std::abs(es.eigenvalues()[b2]);
            });
            out.clear();
            bool all_good = true;
            for (int j = 0; j < count && j < kk; ++j) {
                const double theta = es.eigenvalues()[order[j]];
                if (std::abs(theta) < 1e-300) {
                    all_good = false;
                    break;
                }
                EigResult er;
                er.value = shift + 1.0 / theta;
                er.vector = Eigen::VectorXd::Zero(n);
                for (int i = 0; i < kk; ++i)
                    er.vector += es.eigenvectors()(i, order[j]) * V[i];
                er.vector.normalize();
                er.residual = (J * er.vector - er.value * er.vector).norm();
                out.push_back(std::move(er));
                if (out.back().residual > 1e-8) all_good = false;
            }
            if ((all_good && static_cast<int>(out.size()) == count) || breakdown ||
                k == max_steps - 1) {
                std::sort(out.begin(), out.end(), [](const EigResult& a, const EigResult& b) {
                    return std::abs(a.value) < std::abs(b.value);
                });
                return out;
            }
        }
        if (breakdown) break;
        beta.push_back(b);
        V.push_back(w / b);
    }
    std::sort(out.begin(), out.end(), [](const EigResult& a, const EigResult& b) {
        return std::abs(a.value) < std::abs(b.value);
    });
    return out;
}

std::vector<double> smallest_eigs_dense(const SpMat& J, int count) {
    Eigen::MatrixXd D(J);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
    std::vector<double> all(es.eigenvalues().data(),
                            es.eigenvalues().data() + es.eigenvalues().size());
    std::sort(all.begin(), all.end(),
              [](double a, double b) { return std::abs(a) < std::abs(b); });
    all.resize(std::min<std::size_t>(count, all.size()));
    return all;
}

namespace {

double largest_principal_angle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qa(A), qb(B);
    Eigen::MatrixXd Qa = qa.householderQ() * Eigen::MatrixXd::Identity(A.rows(), A.cols());
    Eigen::MatrixXd Qb = qb.householderQ() * Eigen::MatrixXd::Identity(B.rows(), B.cols());
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Qa.transpose() * Qb);
    double smin = svd.singularValues().minCoeff();
    smin = std::clamp(smin, -1.0, 1.0);
    return std::acos(smin);
}

}  // namespace

KernelReport kernel_report(const CMEField& base, const std::vector<double>& D_list,
                           const NewtonOptions& opt) {
    KernelReport rep;
    if (amplitude_measure(base) < 1e-10) {
        rep.verdict = false;
        rep.note = "zero field: no kernel inside the gap";
        return rep;
    }
    if (base.cls == CmeClass::A_m0 || base.cls == CmeClass::Bi_m0) {
        rep.verdict = true;
        rep.computed = false;
        rep.note = "one-component ground state: kernel known non-degenerate";
        return rep;
    }

    const bool blockable = (base.cls == CmeClass::Bii || base.cls == CmeClass::Biii);
    for (double D : D_list) {
        CMEField f = resample_box(base, D, base.dy);
        solve_cme_newton(f, opt);
        LinearizedOperator op = assemble_jacobian(f);

        std::vector<EigResult> eigs;
        std::vector<Eigen::VectorXd> vecs_full;
        if (blockable) {
            JacobianBlocks blocks = block_diagonalize(op, f.cls);
            auto ep = smallest_eigs(blocks.plus, 3);
            auto em = smallest_eigs(blocks.minus, 3);
            const std::ptrdiff_t blk = static_cast<std::ptrdiff_t>(op.m) * op.m;
            auto embed = [&](const EigResult& e, const std::vector<int>& planes) {
                EigResult full = e;
                full.vector = Eigen::VectorXd::Zero(
                    static_cast<std::ptrdiff_t>(op.planes.size()) * blk);
                for (std::size_t i = 0; i < planes.size(); ++i)
                    full.vector.segment(planes[i] * blk, blk) =
                        e.vector.segment(static_cast<std::ptrdiff_t>(i) * blk, blk);
                return full;
            };
            for (const auto& e : ep) eigs.push_back(embed(e, blocks.plus_planes));
            for (const auto& e : em) eigs.push_back(embed(e, blocks.minus_planes));
            std::sort(eigs.begin(), eigs.end(), [](const EigResult& a, const EigResult& b) {
                return std::abs(a.value) < std::abs(b.value);
            });
            eigs.resize(std::min<std::size_t>(4, eigs.size()));
        } else {
            eigs = smallest_eigs(op.J, 4);
        }

        KernelReportRow row;
        row.D = D;
        for (std::size_t i = 0; i < 4 && i < eigs.size(); ++i) row.eigs[i] = eigs[i].value;
        Eigen::MatrixXd K = kernel_candidates(f, op);
        Eigen::MatrixXd Vk(K.rows(), 3);
        for (int i = 0; i < 3 && i < static_cast<int>(eigs.size()); ++i)
            Vk.col(i) = eigs[i].vector;
        row.subspace_angle = largest_principal_angle(K, Vk);
        rep.rows.push_back(row);
    }

    // verdict: the three smallest shrink with D, the fourth stays away from
    // zero, and the near-kernel aligns with the analytic candidates
    bool shrink = true, fourth_away = true;
    for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i)
        for (int j = 0; j < 3; ++j)
            if (std::abs(rep.rows[i + 1].eigs[j]) > std::abs(rep.rows[i].eigs[j]) + 1e-12)
                shrink = false;
    if (!rep.rows.empty()) {
        const auto& last = rep.rows.back();
        for (int j = 0; j < 3; ++j)
            if (std::abs(last.eigs[j]) >= std::abs(last.eigs[3])) fourth_away = false;
        rep.verdict = shrink && fourth_away && last.subspace_angle <= 0.05 &&
                      std::abs(last.eigs[3]) > 2.0 * std::abs(last.eigs[2]);
    }
    if (!rep.verdict && rep.note.empty())
        rep.note = shrink ? "fourth eigenvalue not separated" : "kernel eigenvalues not shrinking";
    return rep;
}

}  // namespace gapweaver
