#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace caplab {

/// Number of workers used when a caller asks for 0.
inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/**
 * Runs body(i) for i in [0, count) on up to `jobs` threads. Results must be
 * written to per-index slots so that the outcome does not depend on the
 * schedule. The exception thrown for the smallest index is rethrown.
 */
template <typename Body>
void parallel_for(std::size_t count, unsigned jobs, Body&& body) {
    if (jobs == 0) jobs = default_jobs();
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
    std::vector<std::exception_ptr> errors(count);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < jobs; ++t)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace caplab
