#include "gapweaver/parallel.hpp"

#include <fftw3.h>
#include <omp.h>

#include <cstdlib>
#include <mutex>

namespace gapweaver {

namespace {
int g_threads = 0;
std::once_flag g_once;
}  // namespace

void init_threads() {
    std::call_once(g_once, [] {
        int n = omp_get_max_threads();
        if (const char* env = std::getenv("GAPWEAVER_THREADS")) {
            int cap = std::atoi(env);
            if (cap >= 1 && cap < n) n = cap;
        }
        omp_set_num_threads(n);
        fftw_init_threads();
        fftw_plan_with_nthreads(n);
        g_threads = n;
    });
}

int threads() {
    init_threads();
    return g_threads;
}

}  // namespace gapweaver
