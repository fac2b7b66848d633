#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace neurorate::detail {

/// Runs body(i) for i in [0, n) on up to `threads` threads in contiguous
/// chunks. The first exception (by chunk order) is rethrown after joining.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = n * t / threads, hi = n * (t + 1) / threads;
        pool.emplace_back([&, lo, hi, t] {
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace neurorate::detail
