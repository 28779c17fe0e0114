#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace demsr {

// Process-wide worker cap, set once by the CLI --threads flag.
inline int& thread_cap() {
    static int cap = 0; // 0 = hardware concurrency
    return cap;
}

inline int effective_threads(std::size_t jobs) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    int cap = thread_cap() > 0 ? std::min(thread_cap(), hw) : hw;
    return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cap), jobs));
}

// Runs fn(i) for i in [0, jobs). Workers pull indices from a shared counter;
// callers must keep per-index outputs independent so results do not depend
// on scheduling.
template <typename Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
    if (jobs == 0) return;
    const int nthreads = effective_threads(jobs);
    if (nthreads <= 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
        workers.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next.store(jobs); // stop handing out work
                    return;
                }
            }
        });
    }
    for (std::thread& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

} // namespace demsr
