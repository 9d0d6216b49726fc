#include "mehdg/workers.hpp"
#include "mehdg/types.hpp"

#include <algorithm>
#include <ctime>
#include <exception>
#include <numeric>
#include <thread>

namespace mehdg
{

double thread_cpu_seconds()
{
    timespec ts{};
    clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
    return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

WorkerPool::WorkerPool(int workers) : workers_(workers)
{
    if (workers < 1)
        throw InvalidArgument("worker count must be at least 1");
    busy_.assign(workers, 0.0);
}

void WorkerPool::reset_busy() { std::fill(busy_.begin(), busy_.end(), 0.0); }

double WorkerPool::load_balance_factor() const
{
    const double mx = *std::max_element(busy_.begin(), busy_.end());
    if (mx <= 0.0)
        return 1.0;
    const double mean = std::accumulate(busy_.begin(), busy_.end(), 0.0) / workers_;
    return mean / mx;
}

void WorkerPool::parallel_for(int count, const std::function<void(int)>& fn)
{
    if (count <= 0)
        return;
    auto run = [&](int w) {
        const int begin = static_cast<int>(static_cast<long long>(count) * w / workers_);
        const int end = static_cast<int>(static_cast<long long>(count) * (w + 1) / workers_);
        const double t0 = thread_cpu_seconds();
        for (int i = begin; i < end; ++i)
            fn(i);
        busy_[w] += thread_cpu_seconds() - t0;
    };
    if (workers_ == 1) {
        run(0);
        return;
    }
    std::vector<std::exception_ptr> errors(workers_);
    std::vector<std::thread> threads;
    threads.reserve(workers_ - 1);
    for (int w = 1; w < workers_; ++w)
        threads.emplace_back([&, w] {
            try {
                run(w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    try {
        run(0);
    } catch (...) {
        errors[0] = std::current_exception();
    }
    for (auto& t : threads)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace mehdg
