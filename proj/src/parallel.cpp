#include "ocecrl/parallel.hpp"

#include <atomic>
#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ocecrl {

namespace {

ExecMode initial_mode() {
    const char* forced = std::getenv("OCECRL_SERIAL");
    if (forced && forced[0] == '1') return ExecMode::serial;
#ifdef _OPENMP
    return ExecMode::openmp;
#else
    return ExecMode::serial;
#endif
}

std::atomic<ExecMode> g_mode{initial_mode()};

} // namespace

ExecMode execution_mode() { return g_mode.load(); }

void set_execution_mode(ExecMode mode) { g_mode.store(mode); }

bool openmp_available() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

int worker_count() {
#ifdef _OPENMP
    if (execution_mode() == ExecMode::openmp) return omp_get_max_threads();
#endif
    return 1;
}

namespace detail {

void run_indexed(std::size_t n, const std::function<void(std::size_t)>& body) {
#ifdef _OPENMP
    if (execution_mode() == ExecMode::openmp) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i)
            body(static_cast<std::size_t>(i));
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) body(i);
}

} // namespace detail
} // namespace ocecrl
