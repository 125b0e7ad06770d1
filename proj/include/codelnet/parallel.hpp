#ifndef CODELNET_PARALLEL_HPP
#define CODELNET_PARALLEL_HPP

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace codelnet {

// Persistent worker pool. Ranges are split into one contiguous chunk per
// lane and every index is processed by exactly one lane in ascending order,
// so results do not depend on the worker count. Nested calls run serial.
class ThreadPool {
public:
    static ThreadPool& instance();

    // total lanes including the calling thread; n <= 0 selects a default
    void set_workers(int n);
    int workers();

    void for_range(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

    ~ThreadPool();
    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

private:
    ThreadPool() = default;
    void start_locked(int lanes);
    void stop_locked();
    void worker_main(int lane);

    std::mutex mu_;
    std::condition_variable cv_job_;
    std::condition_variable cv_done_;
    std::vector<std::thread> threads_;
    int lanes_ = 0;
    std::uint64_t generation_ = 0;
    std::int64_t job_n_ = 0;
    const std::function<void(std::int64_t, std::int64_t)>* job_fn_ = nullptr;
    int pending_ = 0;
    bool stop_ = false;
};

// fn(begin, end) over a deterministic partition of [0, n)
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

void set_worker_count(int n);
int worker_count();

} // namespace codelnet

#endif
