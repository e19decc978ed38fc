#include "gapweaver/radial.hpp"

#include <algorithm>
#include <cmath>

#include "gapweaver/errors.hpp"

namespace gapweaver {

namespace {

// RHS of the shooting variable: u = R (m = 0) or u = Q = r^-m R (m >= 1).
//   m = 0:  u'' = -u'/r + kappa2 u - g u^3
//   m >= 1: u'' = -(2m+1) u'/r + kappa2 u - g r^{2m} u^3
struct Rhs {
    double kappa2, g;
    int m;
    void operator()(double r, double u, double v, double& du, double& dv) const {
        du = v;
        const double cubic = (m == 0) ? g * u * u * u : g * std::pow(r, 2 * m) * u * u * u;
        if (r < 1e-14) {
            dv = (kappa2 * u - cubic) / (2.0 * m + 2.0);
        } else {
            dv = -(2.0 * m + 1.0) * v / r + kappa2 * u - cubic;
        }
    }
};

enum class Shot { Crossed, TurnedBack, Decayed };

// Integrate with RK4; classify the trajectory. Fills the sample arrays when
// out != nullptr (values of u on the uniform grid).
Shot integrate(const Rhs& rhs, double a, double r_max, double dr, std::vector<double>* out,
               int* steps_done = nullptr) {
    double u = a, v = 0.0, r = 0.0;
    const int n = static_cast<int>(std::round(r_max / dr));
    if (out) {
        out->clear();
        out->reserve(n + 1);
        out->push_back(u);
    }
    Shot shot = Shot::Decayed;
    int i = 0;
    // for m >= 1 the Q profile legitimately rises near the origin before the
    // cubic term bends it down, so a positive derivative only signals a
    // turnaround once decay has started
    bool decay_started = false;
    for (; i < n; ++i) {
        double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v;
        rhs(r, u, v, k1u, k1v);
        rhs(r + 0.5 * dr, u + 0.5 * dr * k1u, v + 0.5 * dr * k1v, k2u, k2v);
        rhs(r + 0.5 * dr, u + 0.5 * dr * k2u, v + 0.5 * dr * k2v, k3u, k3v);
        rhs(r + dr, u + dr * k3u, v + dr * k3v, k4u, k4v);
        u += dr / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u);
        v += dr / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
        r += dr;
        if (out) out->push_back(u);
        if (v < 0.0) decay_started = true;
        if (u < 0.0) {
            shot = Shot::Crossed;
            ++i;
            break;
        }
        if ((decay_started && v > 0.0 && u > 1e-13 * a) || u > 3.0 * a) {
            shot = Shot::TurnedBack;
            ++i;
            break;
        }
    }
    if (steps_done) *steps_done = i;
    return shot;
}

}  // namespace

RadialProfile shoot_profile(double kappa2, double g, int m, double r_max, double dr) {
    if (kappa2 <= 0.0) throw NoLocalizedSolution("no decay: kappa^2 <= 0");
    if (g <= 0.0) throw Error("degenerate cubic coefficient in radial profile");
    const double kappa = std::sqrt(kappa2);
    if (kappa * r_max < 18.5)
        throw TailContamination("r_max too small to certify decay below 1e-8");

    Rhs rhs{kappa2, g, m};
    // bracket the separatrix amplitude; the m=0 scale kappa/sqrt(g) is a good
    // anchor for every m
    const double scale = kappa / std::sqrt(g);
    double lo = 0.0, hi = 0.0;
    {
        double a = 0.2 * scale;
        for (int i = 0; i < 200; ++i) {
            Shot s = integrate(rhs, a, r_max, dr, nullptr);
            if (s == Shot::Crossed) {
                hi = a;
                break;
            }
            lo = a;
            a *= 1.3;
        }
        if (hi == 0.0) throw NoLocalizedSolution("no amplitude bracket found");
    }
    for (int it = 0; it < 200 && (hi - lo) > 1e-16 * hi; ++it) {
        double mid = 0.5 * (lo + hi);
        Shot s = integrate(rhs, mid, r_max, dr, nullptr);
        if (s == Shot::Crossed)
            hi = mid;
        else
            lo = mid;
    }
    const double a = 0.5 * (lo + hi);

    std::vector<double> u;
    int steps = 0;
    integrate(rhs, a, r_max, dr, &u, &steps);
    const int n = static_cast<int>(std::round(r_max / dr));

    RadialProfile prof;
    prof.m = m;
    prof.kappa2 = kappa2;
    prof.g = g;
    prof.dr = dr;
    prof.r_max = r_max;
    prof.r.resize(n + 1);
    prof.R.resize(n + 1);
    for (int i = 0; i <= n; ++i) prof.r[i] = i * dr;

    // convert the shooting variable to R and patch the far tail, where the
    // bisection end state inevitably drifts off the separatrix, with the
    // analytic e^{-kappa r}/sqrt(r) decay
    auto to_R = [&](int i) {
        double val = (i < static_cast<int>(u.size())) ? u[i] : 0.0;
        return (m == 0) ? val : std::pow(prof.r[i], m) * val;
    };
    int cut = std::min<int>(steps, n);
    // walk back from the end of integration to the last radius where the
    // profile is still cleanly decaying
    double floor_amp = 1e-13 * a;
    while (cut > 1 && (to_R(cut) <= floor_amp || to_R(cut) >= to_R(cut - 1))) --cut;
    for (int i = 0; i <= cut; ++i) prof.R[i] = to_R(i);
    const double rc = prof.r[cut], Rc = prof.R[cut];
    for (int i = cut + 1; i <= n; ++i)
        prof.R[i] = Rc * std::exp(-kappa * (prof.r[i] - rc)) * std::sqrt(rc / prof.r[i]);

    prof.amplitude0 = (m == 0) ? prof.R[0] : a;
    return prof;
}

RadialProfile solve_radial_profile(RadialClass cls, int m, double Omega, int sigma,
                                   const ResonanceCoefficients& c, double r_max,
                                   double dr) {
    double kappa2 = 0.0, g = 0.0, alpha_eff = 0.0;
    if (cls == RadialClass::A) {
        if (sigma != +1)
            throw NoLocalizedSolution("class A requires sigma = +1");
        kappa2 = Omega - c.beta2;
        if (kappa2 <= 0.0)
            throw NoLocalizedSolution("class A needs Omega above the lower edge beta2");
        g = c.gamma4;
        alpha_eff = std::abs(c.alpha3);
    } else {
        if (sigma != -1)
            throw NoLocalizedSolution("class B-i requires sigma = -1");
        kappa2 = c.beta1 - Omega;
        if (kappa2 <= 0.0)
            throw NoLocalizedSolution("class B-i needs Omega below the upper edge beta1");
        g = c.gamma1;
        alpha_eff = std::sqrt(c.alpha1 * c.alpha2);
    }
    const double kappa = std::sqrt(kappa2);
    if (r_max <= 0.0) r_max = 25.0 / kappa;
    if (dr <= 0.0) dr = r_max / 30000.0;

    RadialProfile prof = shoot_profile(kappa2, g, m, r_max, dr);
    prof.cls = cls;
    prof.Omega = Omega;
    prof.sigma = sigma;
    prof.alpha_eff = alpha_eff;
    prof.decay_rate = std::sqrt(kappa2 / alpha_eff);

    // verify the computed (unpatched) tail against C e^{-kappa r}/sqrt(r)
    const double amp = prof.amplitude0;
    auto value = [&](double rq) {
        int i = static_cast<int>(rq / prof.dr);
        return prof.R[std::min<std::size_t>(i, prof.R.size() - 1)];
    };
    double ra = 8.0 / kappa, rb = 12.0 / kappa;
    double fa = value(ra), fb = value(rb);
    if (fa > 1e-12 * amp && fb > 1e-12 * amp) {
        double slope = (std::log(fb * std::sqrt(rb)) - std::log(fa * std::sqrt(ra))) / (rb - ra);
        if (std::abs(slope + kappa) > 0.05 * kappa)
            throw NumericalFailure("radial tail decay does not match the expected rate",
                                   std::abs(slope + kappa) / kappa);
    }
    return prof;
}

double RadialProfile::eval(double rq) const {
    rq = std::abs(rq);
    const int n = static_cast<int>(R.size()) - 1;
    if (rq >= r_max) {
        const double kappa = std::sqrt(kappa2);
        return R[n] * std::exp(-kappa * (rq - r_max)) * std::sqrt(r_max / std::max(rq, 1e-300));
    }
    // Catmull-Rom cubic on the uniform grid
    double s = rq / dr;
    int i = std::min(static_cast<int>(s), n - 1);
    double t = s - i;
    auto at = [&](int j) {
        if (j < 0) {
            // even extension for m=0, odd for m>=1 (R ~ r^m near zero)
            return (m % 2 == 0) ? R[-j] : -R[-j];
        }
        return R[std::min(j, n)];
    };
    double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
    double a0 = p1;
    double a1 = 0.5 * (p2 - p0);
    double a2 = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    double a3 = 0.5 * (p3 - p0) + 1.5 * (p1 - p2);
    return a0 + t * (a1 + t * (a2 + t * a3));
}

}  // namespace gapweaver
