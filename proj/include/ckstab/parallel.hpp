#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace ckstab {

/// Evaluates f(i) for i in [0, count) on a pool of threads and returns the
/// results in index order. The first exception thrown by any worker is
/// rethrown on the calling thread.
template <typename F>
auto parallel_map(std::size_t count, F&& f, unsigned threads = 0) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<R> out(count);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, count)));

    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
        return out;
    }

    // std::vector<bool> is bit-packed.
    struct Slot {
        R value{};
    };
    std::vector<Slot> slots(count);
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < count; i += threads) {
                    try {
                        slots[i].value = f(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        return;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
    for (std::size_t i = 0; i < count; ++i) out[i] = std::move(slots[i].value);
    return out;
}

}  // namespace ckstab
