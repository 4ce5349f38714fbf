#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace choqlog {

/// Worker pool width: CHOQLOG_WORKERS if set, hardware parallelism otherwise.
inline int worker_count() {
    static const int n = [] {
        if (const char* e = std::getenv("CHOQLOG_WORKERS")) {
            const int v = std::atoi(e);
            if (v >= 1) return v;
        }
        const unsigned hc = std::thread::hardware_concurrency();
        return hc ? static_cast<int>(hc) : 1;
    }();
    return n;
}

/// Runs fn(block) for block = 0..nblocks-1 on the pool. Results must be written to
/// per-block slots; combining slots in index order makes every schedule produce
/// identical output.
template <class Fn>
void parallel_blocks(std::size_t nblocks, Fn&& fn) {
    const std::size_t nw =
        std::min<std::size_t>(static_cast<std::size_t>(worker_count()), nblocks);
    if (nw <= 1) {
        for (std::size_t b = 0; b < nblocks; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto work = [&] {
        try {
            for (;;) {
                const std::size_t b = next.fetch_add(1);
                if (b >= nblocks) return;
                fn(b);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(err_mu);
            if (!first_error) first_error = std::current_exception();
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(nw - 1);
    for (std::size_t i = 1; i < nw; ++i) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace choqlog
