#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace farmstate {

// Runs fn(i) for i in [0, n_jobs). Jobs must be independent and write only to
// their own output slots; results are then identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n_jobs, int threads, Fn&& fn) {
    if (threads <= 1 || n_jobs <= 1) {
        for (std::size_t i = 0; i < n_jobs; ++i) fn(i);
        return;
    }
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n_jobs);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_workers);
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = w; i < n_jobs; i += n_workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace farmstate
