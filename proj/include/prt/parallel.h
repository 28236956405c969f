#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace prt {

// Worker count: PRTGI_THREADS env var if set, else hardware concurrency.
int thread_count();

// Runs f(i) for i in [begin, end) across the pool. Blocks until done.
// Work items must write to disjoint outputs; scheduling order is unspecified.
void parallel_for(int64_t begin, int64_t end, const std::function<void(int64_t)>& f);

// Partitions [0, n) into exactly n_chunks contiguous ranges and runs
// f(chunk_index, chunk_begin, chunk_end) for each. The chunk grid is a pure
// function of (n, n_chunks), independent of the worker count, so per-chunk
// results merged in chunk order are reproducible on any machine load.
void parallel_chunks(int64_t n, int n_chunks,
                     const std::function<void(int, int64_t, int64_t)>& f);

namespace detail {

class ThreadPool {
public:
    static ThreadPool& instance();

    // Runs f(k) for k in [0, n_items), distributing via an atomic cursor.
    void run(int64_t n_items, const std::function<void(int64_t)>& f);

    int workers() const { return static_cast<int>(threads_.size()) + 1; }

    ~ThreadPool();

private:
    explicit ThreadPool(int n_workers);
    void worker_loop();

    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable cv_start_;
    std::condition_variable cv_done_;
    const std::function<void(int64_t)>* job_ = nullptr;
    int64_t job_size_ = 0;
    std::atomic<int64_t> cursor_{0};
    std::atomic<int> active_{0};
    uint64_t generation_ = 0;
    bool shutdown_ = false;
};

}  // namespace detail

}  // namespace prt
