#pragma once

#include <functional>
#include <vector>

namespace mehdg
{

/// Fork-join worker set with static contiguous partitioning of index ranges.
/// Busy time is accumulated per worker as thread CPU time.
class WorkerPool
{
  public:
    explicit WorkerPool(int workers = 1);

    int size() const { return workers_; }

    /// Calls fn(i) for i in [0, count); worker w handles a contiguous block.
    void parallel_for(int count, const std::function<void(int)>& fn);

    const std::vector<double>& busy_seconds() const { return busy_; }
    void reset_busy();
    /// mean(busy) / max(busy); 1 when nothing has run.
    double load_balance_factor() const;

  private:
    int workers_;
    std::vector<double> busy_;
};

/// CPU time consumed by the calling thread, in seconds.
double thread_cpu_seconds();

} // namespace mehdg
