#include "gapweaver/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace gapweaver {

namespace {

// stencil weights scaled by 1/h^2; order 2: [1 -2 1], order 4: [-1 16 -30 16 -1]/12
struct Stencil {
    double w0, w1, w2;  // center, +-1, +-2
    int reach;
};

Stencil make_stencil(double h, int order) {
    const double ih2 = 1.0 / (h * h);
    if (order == 2) return {-2.0 * ih2, ih2, 0.0, 1};
    return {-30.0 / 12.0 * ih2, 16.0 / 12.0 * ih2, -1.0 / 12.0 * ih2, 2};
}

template <typename T>
inline void stencil_row(T* out, const T* in, int n, double a1, double a2,
                        const Stencil& s, int i1) {
    T* orow = out + static_cast<std::ptrdiff_t>(i1) * n;
    if (i1 == 0 || i1 == n - 1) {
        std::memset(orow, 0, sizeof(T) * n);
        return;
    }
    const T* row = in + static_cast<std::ptrdiff_t>(i1) * n;
    const T* rm1 = row - n;
    const T* rp1 = row + n;
    const T* rm2 = row - 2 * n;
    const T* rp2 = row + 2 * n;
    const bool has2m = i1 >= 2, has2p = i1 <= n - 3;
    for (int i2 = 1; i2 < n - 1; ++i2) {
        T acc = (a1 + a2) * s.w0 * row[i2];
        acc += a2 * s.w1 * (row[i2 - 1] + row[i2 + 1]);
        acc += a1 * s.w1 * (rm1[i2] + rp1[i2]);
        if (s.reach == 2) {
            T v2 = T(0);
            if (i2 >= 2) v2 += row[i2 - 2];
            if (i2 <= n - 3) v2 += row[i2 + 2];
            acc += a2 * s.w2 * v2;
            T w2v = T(0);
            if (has2m) w2v += rm2[i2];
            if (has2p) w2v += rp2[i2];
            acc += a1 * s.w2 * w2v;
        }
        orow[i2] = acc;
    }
    orow[0] = T(0);
    orow[n - 1] = T(0);
}

template <typename T>
void stencil_apply_omp(T* out, const T* in, int n, double a1, double a2, double h,
                       int order) {
    const Stencil s = make_stencil(h, order);
#pragma omp parallel for schedule(static)
    for (int i1 = 0; i1 < n; ++i1) stencil_row(out, in, n, a1, a2, s, i1);
}

template <typename T>
void stencil_apply_ser(T* out, const T* in, int n, double a1, double a2, double h,
                       int order) {
    const Stencil s = make_stencil(h, order);
    for (int i1 = 0; i1 < n; ++i1) stencil_row(out, in, n, a1, a2, s, i1);
}

inline void cubic_at(const CmeCubicCoeffs& c, const cdouble& A1, const cdouble& A2,
                     const cdouble& A3, cdouble& o1, cdouble& o2, cdouble& o3) {
    const double n1 = std::norm(A1), n2 = std::norm(A2), n3 = std::norm(A3);
    const cdouble A1c = std::conj(A1), A2c = std::conj(A2), A3c = std::conj(A3);
    o1 = double(c.sigma) * (c.g1 * n1 * A1 + c.g2 * (2.0 * n2 * A1 + A2 * A2 * A1c) +
                            c.g3 * (2.0 * n3 * A1 + A3 * A3 * A1c));
    o2 = double(c.sigma) * (c.g1 * n2 * A2 + c.g2 * (2.0 * n1 * A2 + A1 * A1 * A2c) +
                            c.g3 * (2.0 * n3 * A2 + A3 * A3 * A2c));
    o3 = double(c.sigma) * (c.g4 * n3 * A3 + 2.0 * c.g3 * (n1 + n2) * A3 +
                            c.g3 * (A1 * A1 + A2 * A2) * A3c);
}

inline void rk4_point(const CmeCubicCoeffs& c, cdouble& A1, cdouble& A2, cdouble& A3,
                      double dt) {
    const cdouble mi(0.0, -1.0);
    cdouble k1a, k1b, k1c, k2a, k2b, k2c, k3a, k3b, k3c, k4a, k4b, k4c;
    cubic_at(c, A1, A2, A3, k1a, k1b, k1c);
    k1a *= mi;
    k1b *= mi;
    k1c *= mi;
    cubic_at(c, A1 + 0.5 * dt * k1a, A2 + 0.5 * dt * k1b, A3 + 0.5 * dt * k1c, k2a, k2b,
             k2c);
    k2a *= mi;
    k2b *= mi;
    k2c *= mi;
    cubic_at(c, A1 + 0.5 * dt * k2a, A2 + 0.5 * dt * k2b, A3 + 0.5 * dt * k2c, k3a, k3b,
             k3c);
    k3a *= mi;
    k3b *= mi;
    k3c *= mi;
    cubic_at(c, A1 + dt * k3a, A2 + dt * k3b, A3 + dt * k3c, k4a, k4b, k4c);
    k4a *= mi;
    k4b *= mi;
    k4c *= mi;
    A1 += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
    A2 += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
    A3 += dt / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
}

template <bool Par>
void elliptic_residual_impl(cdouble* out, const cdouble* phi, const double* V, int n,
                            double omega, int sigma, double h) {
    const double ih2 = 1.0 / (h * h);
#pragma omp parallel for schedule(static) if (Par)
    for (int i1 = 0; i1 < n; ++i1) {
        cdouble* orow = out + static_cast<std::ptrdiff_t>(i1) * n;
        const cdouble* row = phi + static_cast<std::ptrdiff_t>(i1) * n;
        const double* vrow = V + static_cast<std::ptrdiff_t>(i1) * n;
        if (i1 == 0 || i1 == n - 1) {
            std::memset(orow, 0, sizeof(cdouble) * n);
            continue;
        }
        const cdouble* rm = row - n;
        const cdouble* rp = row + n;
        for (int i2 = 1; i2 < n - 1; ++i2) {
            cdouble lap = (row[i2 - 1] + row[i2 + 1] + rm[i2] + rp[i2] - 4.0 * row[i2]) * ih2;
            orow[i2] = lap + (omega - vrow[i2]) * row[i2] -
                       double(sigma) * std::norm(row[i2]) * row[i2];
        }
        orow[0] = cdouble(0);
        orow[n - 1] = cdouble(0);
    }
}

template <bool Par>
void elliptic_japply_impl(double* out, const double* v, const double* mfield, int n,
                          double h) {
    const double ih2 = 1.0 / (h * h);
#pragma omp parallel for schedule(static) if (Par)
    for (int i1 = 0; i1 < n; ++i1) {
        double* orow = out + static_cast<std::ptrdiff_t>(i1) * n;
        const double* row = v + static_cast<std::ptrdiff_t>(i1) * n;
        const double* mrow = mfield + static_cast<std::ptrdiff_t>(i1) * n;
        if (i1 == 0 || i1 == n - 1) {
            std::memset(orow, 0, sizeof(double) * n);
            continue;
        }
        const double* rm = row - n;
        const double* rp = row + n;
        for (int i2 = 1; i2 < n - 1; ++i2) {
            double lap = (row[i2 - 1] + row[i2 + 1] + rm[i2] + rp[i2] - 4.0 * row[i2]) * ih2;
            orow[i2] = lap + mrow[i2] * row[i2];
        }
        orow[0] = 0.0;
        orow[n - 1] = 0.0;
    }
}

}  // namespace

void stencil_apply(cdouble* out, const cdouble* in, int n, double a1, double a2, double h,
                   int order) {
    stencil_apply_omp(out, in, n, a1, a2, h, order);
}
void stencil_apply_serial(cdouble* out, const cdouble* in, int n, double a1, double a2,
                          double h, int order) {
    stencil_apply_ser(out, in, n, a1, a2, h, order);
}
void stencil_apply_real(double* out, const double* in, int n, double a1, double a2,
                        double h, int order) {
    stencil_apply_omp(out, in, n, a1, a2, h, order);
}
void stencil_apply_real_serial(double* out, const double* in, int n, double a1, double a2,
                               double h, int order) {
    stencil_apply_ser(out, in, n, a1, a2, h, order);
}

void cme_cubic(std::array<cdouble*, 3> out, std::array<const cdouble*, 3> in, int count,
               const CmeCubicCoeffs& c) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i)
        cubic_at(c, in[0][i], in[1][i], in[2][i], out[0][i], out[1][i], out[2][i]);
}
void cme_cubic_serial(std::array<cdouble*, 3> out, std::array<const cdouble*, 3> in,
                      int count, const CmeCubicCoeffs& c) {
    for (int i = 0; i < count; ++i)
        cubic_at(c, in[0][i], in[1][i], in[2][i], out[0][i], out[1][i], out[2][i]);
}

void cme_cubic_rk4_step(std::array<cdouble*, 3> a, int count, const CmeCubicCoeffs& c,
                        double dt) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) rk4_point(c, a[0][i], a[1][i], a[2][i], dt);
}
void cme_cubic_rk4_step_serial(std::array<cdouble*, 3> a, int count,
                               const CmeCubicCoeffs& c, double dt) {
    for (int i = 0; i < count; ++i) rk4_point(c, a[0][i], a[1][i], a[2][i], dt);
}

void gp_phase_step(cdouble* e, const double* V, int count, int sigma, double dt) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < count; ++i) {
        const double ph = -(V[i] + sigma * std::norm(e[i])) * dt;
        e[i] *= cdouble(std::cos(ph), std::sin(ph));
    }
}
void gp_phase_step_serial(cdouble* e, const double* V, int count, int sigma, double dt) {
    for (int i = 0; i < count; ++i) {
        const double ph = -(V[i] + sigma * std::norm(e[i])) * dt;
        e[i] *= cdouble(std::cos(ph), std::sin(ph));
    }
}

void elliptic_residual_kernel(cdouble* out, const cdouble* phi, const double* V, int n,
                              double omega, int sigma, double h) {
    elliptic_residual_impl<true>(out, phi, V, n, omega, sigma, h);
}
void elliptic_residual_kernel_serial(cdouble* out, const cdouble* phi, const double* V,
                                     int n, double omega, int sigma, double h) {
    elliptic_residual_impl<false>(out, phi, V, n, omega, sigma, h);
}
void elliptic_jacobian_apply(double* out, const double* v, const double* mfield, int n,
                             double h) {
    elliptic_japply_impl<true>(out, v, mfield, n, h);
}
void elliptic_jacobian_apply_serial(double* out, const double* v, const double* mfield,
                                    int n, double h) {
    elliptic_japply_impl<false>(out, v, mfield, n, h);
}

double max_abs(const cdouble* v, int count) {
    double m = 0.0;
#pragma omp parallel for schedule(static) reduction(max : m)
    for (int i = 0; i < count; ++i) m = std::max(m, std::abs(v[i]));
    return m;
}
double max_abs_serial(const cdouble* v, int count) {
    double m = 0.0;
    for (int i = 0; i < count; ++i) m = std::max(m, std::abs(v[i]));
    return m;
}
double dot(const double* a, const double* b, int count) {
    double s = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : s)
    for (int i = 0; i < count; ++i) s += a[i] * b[i];
    return s;
}
double dot_serial(const double* a, const double* b, int count) {
    double s = 0.0;
    for (int i = 0; i < count; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace gapweaver
