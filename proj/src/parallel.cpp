#include "prt/parallel.h"

#include <algorithm>
#include <cstdlib>

namespace prt {

int thread_count() {
    static const int n = [] {
        if (const char* env = std::getenv("PRTGI_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0) return std::min(v, 256);
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return n;
}

namespace detail {

ThreadPool& ThreadPool::instance() {
    static ThreadPool pool(thread_count());
    return pool;
}

ThreadPool::ThreadPool(int n_workers) {
    for (int i = 0; i < n_workers - 1; ++i) {
        threads_.emplace_back([this] { worker_loop(); });
    }
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        shutdown_ = true;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
}

void ThreadPool::worker_loop() {
    uint64_t seen = 0;
    for (;;) {
        const std::function<void(int64_t)>* job = nullptr;
        int64_t size = 0;
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_start_.wait(lock, [&] { return shutdown_ || generation_ != seen; });
            if (shutdown_) return;
            seen = generation_;
            job = job_;
            size = job_size_;
            active_.fetch_add(1);
        }
        for (;;) {
            const int64_t k = cursor_.fetch_add(1, std::memory_order_relaxed);
            if (k >= size) break;
            (*job)(k);
        }
        if (active_.fetch_sub(1) == 1) cv_done_.notify_one();
    }
}

void ThreadPool::run(int64_t n_items, const std::function<void(int64_t)>& f) {
    if (n_items <= 0) return;
    if (threads_.empty() || n_items == 1) {
        for (int64_t k = 0; k < n_items; ++k) f(k);
        return;
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        job_ = &f;
        job_size_ = n_items;
        cursor_.store(0);
        ++generation_;
    }
    cv_start_.notify_all();
    for (;;) {
        const int64_t k = cursor_.fetch_add(1, std::memory_order_relaxed);
        if (k >= n_items) break;
        f(k);
    }
    std::unique_lock<std::mutex> lock(mutex_);
    cv_done_.wait(lock, [&] { return active_.load() == 0; });
    job_ = nullptr;
}

}  // namespace detail

void parallel_for(int64_t begin, int64_t end, const std::function<void(int64_t)>& f) {
    const int64_t n = end - begin;
    if (n <= 0) return;
    // Batch items so the atomic cursor is not contended on tiny bodies.
    const int workers = detail::ThreadPool::instance().workers();
    const int64_t batch = std::max<int64_t>(1, n / (workers * 16));
    const int64_t n_batches = (n + batch - 1) / batch;
    detail::ThreadPool::instance().run(n_batches, [&](int64_t b) {
        const int64_t lo = begin + b * batch;
        const int64_t hi = std::min(end, lo + batch);
        for (int64_t i = lo; i < hi; ++i) f(i);
    });
}

void parallel_chunks(int64_t n, int n_chunks,
                     const std::function<void(int, int64_t, int64_t)>& f) {
    if (n <= 0 || n_chunks <= 0) return;
    const int chunks = static_cast<int>(std::min<int64_t>(n_chunks, n));
    detail::ThreadPool::instance().run(chunks, [&](int64_t c) {
        const int64_t lo = n * c / chunks;
        const int64_t hi = n * (c + 1) / chunks;
        f(static_cast<int>(c), lo, hi);
    });
}

}  // namespace prt
