#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace teps
{
//! Run fn(i) for i in [0, n) on up to `threads` workers.
//!
//! Work is split into contiguous blocks; callers write results by index, so
//! output never depends on the thread count. The first exception thrown by
//! any worker is rethrown on the calling thread.
template<class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn)
{
    std::size_t const workers
        = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
    {
        std::size_t const begin = n * w / workers;
        std::size_t const end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try
            {
                for (std::size_t i = begin; i < end; ++i)
                    fn(i);
            }
            catch (...)
            {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

}  // namespace teps
