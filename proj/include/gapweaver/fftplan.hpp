#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace gapweaver {

/// In-place 2D complex FFT over an n x n row-major buffer owned by this
/// object. Plans use FFTW_ESTIMATE so results are reproducible run to run.
class Fft2 {
  public:
    explicit Fft2(int n);
    ~Fft2();
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;

    std::complex<double>* data() { return buf_; }
    int n() const { return n_; }
    void forward();
    void backward_scaled();  // inverse transform including the 1/n^2 factor

  private:
    int n_;
    std::complex<double>* buf_;
    void* fwd_;
    void* bwd_;
};

/// In-place 2D DST-I (RODFT00) over an L x L row-major buffer; applying it
/// twice multiplies by (2(L+1))^2.
class Dst2 {
  public:
    explicit Dst2(int L);
    ~Dst2();
    Dst2(const Dst2&) = delete;
    Dst2& operator=(const Dst2&) = delete;

    double* data() { return buf_.data(); }
    int L() const { return L_; }
    void execute();

  private:
    int L_;
    std::vector<double> buf_;
    void* plan_;
};

/// FFT frequencies 2*pi*fftfreq(n, d=len/n): k[j] for a periodic box of the
/// given total length.
std::vector<double> fft_wavenumbers(int n, double box_length);

}  // namespace gapweaver
