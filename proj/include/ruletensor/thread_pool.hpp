#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ruletensor {

/// Persistent worker pool for data-parallel sample ranges. Work is always
/// partitioned by index range before execution, so results never depend on
/// scheduling order. A parallel_ranges call issued from inside a worker
/// thread runs inline; nested parallelism degrades to sequential instead of
/// deadlocking.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    /// Number of concurrent executors available (background workers + caller).
    int executor_count() const { return static_cast<int>(workers_.size()) + 1; }

    /// Split [0, n) into `chunks` contiguous ranges and run fn(begin, end)
    /// on each. chunks <= 0 means one chunk per executor. Blocks until all
    /// ranges finish; the caller executes the first range itself.
    void parallel_ranges(int64_t n, int chunks, const std::function<void(int64_t, int64_t)>& fn) {
        if (n <= 0) return;
        if (chunks <= 0) chunks = executor_count();
        if (chunks > n) chunks = static_cast<int>(n);

        if (chunks == 1 || inside_worker()) {
            fn(0, n);
            return;
        }

        const int64_t base = n / chunks;
        const int64_t extra = n % chunks;
        struct Job {
            const std::function<void(int64_t, int64_t)>* fn;
            int64_t begin, end;
        };
        std::vector<Job> jobs;
        jobs.reserve(chunks);
        int64_t pos = 0;
        for (int c = 0; c < chunks; ++c) {
            const int64_t len = base + (c < extra ? 1 : 0);
            jobs.push_back({&fn, pos, pos + len});
            pos += len;
        }

        std::mutex done_mutex;
        std::condition_variable done_cv;
        int remaining = chunks - 1;
        std::exception_ptr first_error;

        {
            std::lock_guard lock(queue_mutex_);
            for (int c = 1; c < chunks; ++c) {
                Job job = jobs[c];
                queue_.push_back([job, &done_mutex, &done_cv, &remaining, &first_error] {
                    try {
                        (*job.fn)(job.begin, job.end);
                    } catch (...) {
                        std::lock_guard l(done_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                    std::lock_guard l(done_mutex);
                    if (--remaining == 0) done_cv.notify_one();
                });
            }
        }
        queue_cv_.notify_all();

        try {
            jobs[0].fn->operator()(jobs[0].begin, jobs[0].end);
        } catch (...) {
            std::lock_guard l(done_mutex);
            if (!first_error) first_error = std::current_exception();
        }

        std::unique_lock lock(done_mutex);
        done_cv.wait(lock, [&] { return remaining == 0; });
        if (first_error) std::rethrow_exception(first_error);
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

private:
    ThreadPool() {
        unsigned hw = std::thread::hardware_concurrency();
        if (hw == 0) hw = 1;
        for (unsigned i = 0; i + 1 < hw; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard lock(queue_mutex_);
            stop_ = true;
        }
        queue_cv_.notify_all();
        for (auto& w : workers_) w.join();
    }

    static bool& inside_worker() {
        thread_local bool flag = false;
        return flag;
    }

    void worker_loop() {
        inside_worker() = true;
        for (;;) {
            std::function<void()> task;
            {
                std::unique_lock lock(queue_mutex_);
                queue_cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
                if (stop_ && queue_.empty()) return;
                task = std::move(queue_.front());
                queue_.pop_front();
            }
            task();
        }
    }

    std::vector<std::thread> workers_;
    std::deque<std::function<void()>> queue_;
    std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    bool stop_ = false;
};

}  // namespace ruletensor
