#include "codelnet/parallel.hpp"

#include <algorithm>

namespace codelnet {

namespace {
thread_local bool t_in_worker = false;
thread_local bool t_in_parallel = false; // caller thread inside a dispatched region

int default_lanes() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return static_cast<int>(std::min(hw, 8u));
}
} // namespace

ThreadPool& ThreadPool::instance() {
    static ThreadPool pool;
    return pool;
}

ThreadPool::~ThreadPool() {
    std::unique_lock<std::mutex> lock(mu_);
    stop_locked();
}

void ThreadPool::start_locked(int lanes) {
    lanes_ = lanes;
    stop_ = false;
    for (int lane = 1; lane < lanes_; ++lane) {
        threads_.emplace_back([this, lane] { worker_main(lane); });
    }
}

void ThreadPool::stop_locked() {
    stop_ = true;
    cv_job_.notify_all();
    std::vector<std::thread> joining;
    joining.swap(threads_);
    mu_.unlock();
    for (auto& t : joining) t.join();
    mu_.lock();
}

void ThreadPool::set_workers(int n) {
    std::unique_lock<std::mutex> lock(mu_);
    int lanes = n <= 0 ? default_lanes() : n;
    if (lanes_ == lanes) return;
    if (!threads_.empty()) stop_locked();
    start_locked(lanes);
}

int ThreadPool::workers() {
    std::unique_lock<std::mutex> lock(mu_);
    if (lanes_ == 0) start_locked(default_lanes());
    return lanes_;
}

void ThreadPool::worker_main(int lane) {
    t_in_worker = true;
    std::uint64_t seen = 0;
    for (;;) {
        const std::function<void(std::int64_t, std::int64_t)>* fn = nullptr;
        std::int64_t n = 0;
        int lanes = 0;
        {
            std::unique_lock<std::mutex> lock(mu_);
            cv_job_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            fn = job_fn_;
            n = job_n_;
            lanes = lanes_;
        }
        std::int64_t begin = n * lane / lanes;
        std::int64_t end = n * (lane + 1) / lanes;
        if (begin < end) (*fn)(begin, end);
        {
            std::unique_lock<std::mutex> lock(mu_);
            if (--pending_ == 0) cv_done_.notify_all();
        }
    }
}

void ThreadPool::for_range(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    if (t_in_worker || t_in_parallel) { // nested region: run serial
        fn(0, n);
        return;
    }
    int lanes;
    {
        std::unique_lock<std::mutex> lock(mu_);
        if (lanes_ == 0) start_locked(default_lanes());
        lanes = lanes_;
        if (lanes > 1 && n > 1) {
            job_fn_ = &fn;
            job_n_ = n;
            pending_ = lanes - 1;
            ++generation_;
            cv_job_.notify_all();
        } else {
            lanes = 1;
        }
    }
    if (lanes == 1) {
        fn(0, n);
        return;
    }
    // caller takes lane 0
    t_in_parallel = true;
    const std::int64_t end0 = n / lanes;
    try {
        if (end0 > 0) fn(0, end0);
    } catch (...) {
        t_in_parallel = false;
        std::unique_lock<std::mutex> lock(mu_);
        cv_done_.wait(lock, [&] { return pending_ == 0; });
        job_fn_ = nullptr;
        throw;
    }
    t_in_parallel = false;
    std::unique_lock<std::mutex> lock(mu_);
    cv_done_.wait(lock, [&] { return pending_ == 0; });
    job_fn_ = nullptr;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    ThreadPool::instance().for_range(n, fn);
}

void set_worker_count(int n) { ThreadPool::instance().set_workers(n); }
int worker_count() { return ThreadPool::instance().workers(); }

} // namespace codelnet
