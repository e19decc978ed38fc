#pragma once

#include <cmath>
#include <functional>

#include "gapweaver/errors.hpp"

namespace gapweaver {

struct RootResult {
    double x;
    double fx;
    int evals;
};

/// Bracketed root of f on [lo, hi]: bisection down to width `bisect_width`,
/// then secant polish until |f| <= ftol. The bracket must carry a sign change.
inline RootResult find_root_bracketed(const std::function<double(double)>& f, double lo,
                                      double hi, double bisect_width, double ftol,
                                      double flo_in = NAN, double fhi_in = NAN) {
    double flo = std::isnan(flo_in) ? f(lo) : flo_in;
    double fhi = std::isnan(fhi_in) ? f(hi) : fhi_in;
    int evals = std::isnan(flo_in) + std::isnan(fhi_in);
    if (flo == 0.0) return {lo, 0.0, evals};
    if (fhi == 0.0) return {hi, 0.0, evals};
    if (std::signbit(flo) == std::signbit(fhi))
        throw BracketError("no sign change on bracket");
    while (hi - lo > bisect_width) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        ++evals;
        if (fm == 0.0) return {mid, 0.0, evals};
        if (std::signbit(fm) == std::signbit(flo)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    // secant polish, falling back to the midpoint when the step leaves [lo,hi]
    double x0 = lo, f0 = flo, x1 = hi, f1 = fhi;
    for (int it = 0; it < 60; ++it) {
        if (std::abs(f1) <= ftol) return {x1, f1, evals};
        double denom = f1 - f0;
        double x2 = (denom != 0.0) ? x1 - f1 * (x1 - x0) / denom : 0.5 * (lo + hi);
        if (!(x2 >= lo && x2 <= hi)) x2 = 0.5 * (lo + hi);
        double f2 = f(x2);
        ++evals;
        if (std::signbit(f2) == std::signbit(flo)) {
            lo = x2;
            flo = f2;
        } else {
            hi = x2;
            fhi = f2;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f2;
        if (hi - lo < 1e-300) break;
    }
    return {x1, f1, evals};
}

}  // namespace gapweaver
