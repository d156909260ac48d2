#pragma once

#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ebmine {

inline unsigned default_thread_count() {
    if (const char* env = std::getenv("EBMINE_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; results
// must be written to per-index slots so the outcome is independent of the
// thread count.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned n_threads = 0) {
    if (n == 0) return;
    if (n_threads == 0) n_threads = default_thread_count();
    if (n_threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (n_threads > n) n_threads = static_cast<unsigned>(n);
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    std::exception_ptr error;
    std::mutex error_mu;
    for (unsigned t = 0; t < n_threads; ++t) {
        std::size_t lo = n * t / n_threads;
        std::size_t hi = n * (t + 1) / n_threads;
        workers.emplace_back([&, lo, hi] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

} // namespace ebmine
