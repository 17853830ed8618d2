#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace emip {

/// Worker count used by parallel_for. Defaults to the hardware concurrency.
int thread_count() noexcept;
/// Values < 1 restore the default.
void set_thread_count(int n) noexcept;

/// Runs body(begin, end) over contiguous chunks of [0, n). Every index is
/// visited exactly once; callers must write disjoint outputs per index so the
/// result does not depend on the worker count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body, std::size_t min_chunk = 1024) {
    if (n == 0) return;
    const std::size_t max_workers = std::max<std::size_t>(1, (n + min_chunk - 1) / min_chunk);
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), max_workers);
    if (workers <= 1) {
        body(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, w, lo, hi] {
                try {
                    body(lo, hi);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        try {
            body(std::size_t{0}, std::min(n, chunk));
        } catch (...) {
            errors[0] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace emip
