#pragma once

#include <cstddef>
#include <functional>

namespace ocecrl {

// Every parallel kernel in this project writes to disjoint, index-addressed
// slots and reduces in a fixed order afterwards, so serial and OpenMP
// execution produce identical bytes. The serial path is kept as the
// reference implementation; tests compare the two.
enum class ExecMode { serial, openmp };

ExecMode execution_mode();
void set_execution_mode(ExecMode mode);
bool openmp_available();
int worker_count();

namespace detail {
void run_indexed(std::size_t n, const std::function<void(std::size_t)>& body);
}

template <class F>
void parallel_for(std::size_t n, F&& body) {
    detail::run_indexed(n, std::function<void(std::size_t)>(std::forward<F>(body)));
}

// Chunked variant for bodies that need a private mutable context (e.g. an
// environment handle): one context per chunk, never shared across indices
// running concurrently. Results must depend only on the index, not the
// chunking, which every caller here guarantees by seed-isolating each index.
template <class MakeCtx, class Body>
void parallel_for_ctx(std::size_t n, MakeCtx&& make_ctx, Body&& body) {
    if (n == 0) return;
    const std::size_t chunks =
        std::min<std::size_t>(n, static_cast<std::size_t>(worker_count()) * 4);
    detail::run_indexed(chunks, [&](std::size_t c) {
        auto ctx = make_ctx();
        const std::size_t lo = n * c / chunks;
        const std::size_t hi = n * (c + 1) / chunks;
        for (std::size_t i = lo; i < hi; ++i) body(*ctx, i);
    });
}

} // namespace ocecrl
