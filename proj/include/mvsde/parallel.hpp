#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mvsde {

/// Persistent fork-join team. `for_chunks(n, fn)` splits [0, n) into one
/// contiguous chunk per thread (chunk c covers a fixed index range that depends
/// only on n and the team size) and blocks until all chunks finish. The caller
/// thread runs chunk 0.
class WorkerTeam {
public:
    explicit WorkerTeam(std::size_t threads) : size_(std::max<std::size_t>(1, threads)) {
        for (std::size_t w = 1; w < size_; ++w) workers_.emplace_back([this, w] { loop(w); });
    }

    WorkerTeam(const WorkerTeam&) = delete;
    WorkerTeam& operator=(const WorkerTeam&) = delete;

    ~WorkerTeam() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
            ++generation_;
        }
        wake_.notify_all();
        for (auto& t : workers_) t.join();
    }

    std::size_t size() const noexcept { return size_; }

    /// Runs fn(chunk, begin, end) for every chunk. The first exception (by
    /// chunk index) is rethrown after all chunks have finished.
    void for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
        if (size_ == 1 || n < 2) {
            fn(0, 0, n);
            return;
        }
        errors_.assign(size_, nullptr);
        {
            std::lock_guard lock(mutex_);
            task_ = &fn;
            count_ = n;
            pending_ = size_ - 1;
            ++generation_;
        }
        wake_.notify_all();
        run_chunk(0);
        {
            std::unique_lock lock(mutex_);
            done_.wait(lock, [this] { return pending_ == 0; });
            task_ = nullptr;
        }
        for (auto& e : errors_)
            if (e) std::rethrow_exception(e);
    }

    static std::pair<std::size_t, std::size_t> chunk_range(std::size_t n, std::size_t parts,
                                                           std::size_t chunk) {
        const std::size_t base = n / parts;
        const std::size_t extra = n % parts;
        const std::size_t begin = chunk * base + std::min(chunk, extra);
        return {begin, begin + base + (chunk < extra ? 1 : 0)};
    }

private:
    void run_chunk(std::size_t chunk) {
        const auto [begin, end] = chunk_range(count_, size_, chunk);
        try {
            if (begin < end) (*task_)(chunk, begin, end);
        } catch (...) {
            errors_[chunk] = std::current_exception();
        }
    }

    void loop(std::size_t chunk) {
        std::size_t seen = 0;
        for (;;) {
            {
                std::unique_lock lock(mutex_);
                wake_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (stop_) return;
            }
            run_chunk(chunk);
            {
                std::lock_guard lock(mutex_);
                if (--pending_ == 0) done_.notify_one();
            }
        }
    }

    std::size_t size_;
    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    std::size_t generation_ = 0;
    std::size_t pending_ = 0;
    std::size_t count_ = 0;
    bool stop_ = false;
    const std::function<void(std::size_t, std::size_t, std::size_t)>* task_ = nullptr;
    std::vector<std::exception_ptr> errors_;
};

/// Runs job(i) for i in [0, n) on up to `threads` threads. Jobs must write
/// only to their own output slot. The exception of the lowest failing index
/// is rethrown.
inline void parallel_jobs(std::size_t n, std::size_t threads,
                          const std::function<void(std::size_t)>& job) {
    threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace mvsde
