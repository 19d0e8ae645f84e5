#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace debm {

/// Runs fn(i) for i in [0, n) on up to `jobs` worker threads. Work items
/// must be independent and write only to their own result slots; every item
/// carries its own derived RNG stream, so the outcome does not depend on
/// the worker count or on scheduling. The first exception thrown by any
/// item is rethrown on the calling thread after all workers finish.
template <typename Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const size_t workers = std::min<size_t>(static_cast<size_t>(jobs), n);
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace debm
