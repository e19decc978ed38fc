#pragma once

namespace gapweaver {

/// Number of worker threads. Defaults to the OpenMP thread count,
/// capped by the GAPWEAVER_THREADS environment variable when set.
int threads();

/// Apply the thread cap to OpenMP and FFTW. Called lazily by threads();
/// safe to call more than once.
void init_threads();

}  // namespace gapweaver
