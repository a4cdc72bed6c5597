#pragma once

// Deterministic parallel map-reduce over replicate indices.
//
// Work is split into fixed-size chunks independent of the thread count.
// Each chunk is reduced sequentially in index order, and chunk results are
// merged in chunk order, so the result is bit-identical for any number of
// threads.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dvcover/error.hpp"

namespace dvcover {

inline constexpr std::int64_t kChunkSize = 256;

/// Thread count from DVCOVER_THREADS, else the hardware concurrency.
inline int default_threads()
{
    if (const char* env = std::getenv("DVCOVER_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 1024) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Run body(i) for i in [0, count) on `threads` workers.
template <typename Body>
void parallel_for(std::int64_t count, int threads, Body&& body)
{
    if (count <= 0) return;
    threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<std::int64_t>(count, 1024))));
    if (threads == 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::int64_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Reduce replicates [0, count). `replicate(i, acc)` folds replicate i into
/// a chunk accumulator; accumulators must provide merge(const Acc&).
template <typename Acc, typename Replicate>
Acc chunked_reduce(std::int64_t count, int threads, Replicate&& replicate)
{
    const std::int64_t chunks = (count + kChunkSize - 1) / kChunkSize;
    std::vector<Acc> partial(static_cast<std::size_t>(std::max<std::int64_t>(chunks, 0)));
    parallel_for(chunks, threads, [&](std::int64_t c) {
        Acc acc;
        const std::int64_t end = std::min(count, (c + 1) * kChunkSize);
        for (std::int64_t i = c * kChunkSize; i < end; ++i) replicate(i, acc);
        partial[static_cast<std::size_t>(c)] = std::move(acc);
    });
    Acc total;
    for (const auto& p : partial) total.merge(p);
    return total;
}

/// Evaluate f(i) for i in [0, count) into a vector, in index order.
template <typename T, typename F>
std::vector<T> parallel_map(std::int64_t count, int threads, F&& f)
{
    std::vector<T> out(static_cast<std::size_t>(std::max<std::int64_t>(count, 0)));
    parallel_for(count, threads, [&](std::int64_t i) { out[static_cast<std::size_t>(i)] = f(i); });
    return out;
}

} // namespace dvcover
