#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace wiretap {

// Worker count: hardware concurrency, capped by WIRETAP_THREADS when set.
inline unsigned worker_count() {
    unsigned workers = std::max(1U, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("WIRETAP_THREADS")) {
        try {
            const long cap = std::stol(env);
            if (cap >= 1) workers = std::min<unsigned>(workers, static_cast<unsigned>(cap));
        } catch (const std::exception&) {
        }
    }
    return workers;
}

// Runs body(i) for i in [0, count). Work items must be independent; results
// are expected to be written to per-item slots and reduced by the caller in
// index order, which keeps output independent of the worker count.
template <typename Body>
void parallel_for(std::size_t count, Body&& body, unsigned workers = worker_count()) {
    workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1U, workers), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace wiretap
