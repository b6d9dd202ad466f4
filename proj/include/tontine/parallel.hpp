#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace tontine {

// Runs fn(chunk_index, begin, end) over [0, n) split into fixed chunks.
// Chunk boundaries depend only on n and chunk_size, never on the thread
// count, so callers that combine per-chunk partials in chunk order get
// bit-identical results on any machine. Chunks must write disjoint state.
inline void parallel_chunks(long n, long chunk_size,
                            const std::function<void(int, long, long)>& fn) {
    if (n <= 0) return;
    const int n_chunks = static_cast<int>((n + chunk_size - 1) / chunk_size);
    unsigned hw = std::thread::hardware_concurrency();
    int n_threads = static_cast<int>(hw == 0 ? 1 : hw);
    if (n_threads > n_chunks) n_threads = n_chunks;
    if (n_threads <= 1) {
        for (int c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min<long>(n, (c + 1) * chunk_size));
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&]() {
        try {
            for (;;) {
                int c = next.fetch_add(1);
                if (c >= n_chunks) return;
                fn(c, c * chunk_size, std::min<long>(n, (c + 1) * chunk_size));
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n_threads) - 1);
    for (int t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace tontine
