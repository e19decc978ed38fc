#include "gapweaver/fftplan.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

#include "gapweaver/parallel.hpp"

namespace gapweaver {

namespace {
// FFTW planning is not thread-safe; execution is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

Fft2::Fft2(int n) : n_(n) {
    init_threads();
    buf_ = reinterpret_cast<std::complex<double>*>(
        fftw_malloc(sizeof(fftw_complex) * static_cast<std::size_t>(n) * n));
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto* b = reinterpret_cast<fftw_complex*>(buf_);
    fwd_ = fftw_plan_dft_2d(n, n, b, b, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(n, n, b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft2::~Fft2() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(bwd_));
    fftw_free(buf_);
}

void Fft2::forward() { fftw_execute(static_cast<fftw_plan>(fwd_)); }

void Fft2::backward_scaled() {
    fftw_execute(static_cast<fftw_plan>(bwd_));
    const double s = 1.0 / (static_cast<double>(n_) * n_);
    const std::size_t count = static_cast<std::size_t>(n_) * n_;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) buf_[i] *= s;
}

Dst2::Dst2(int L) : L_(L), buf_(static_cast<std::size_t>(L) * L) {
    init_threads();
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan_ = fftw_plan_r2r_2d(L, L, buf_.data(), buf_.data(), FFTW_RODFT00, FFTW_RODFT00,
                             FFTW_ESTIMATE);
}

Dst2::~Dst2() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void Dst2::execute() { fftw_execute(static_cast<fftw_plan>(plan_)); }

std::vector<double> fft_wavenumbers(int n, double box_length) {
    std::vector<double> k(n);
    const double dk = 2.0 * M_PI / box_length;
    for (int j = 0; j < n; ++j) {
        int f = (j <= n / 2) ? j : j - n;
        k[j] = dk * f;
    }
    return k;
}

}  // namespace gapweaver
