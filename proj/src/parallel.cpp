#include "voxfuse/core/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace voxfuse {
namespace {

// Single-job pool. The job state lives in the pool itself so that late
// workers only ever touch storage that outlives the submission; run() drains
// all participants before returning.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  int threads() const { return threads_; }

  void set_threads(int n) {
    std::lock_guard<std::mutex> submit(submit_mutex_);
    shutdown_workers();
    threads_ = n < 1 ? 1 : n;
    spawn_workers();
  }

  void run(const std::function<void(int, std::int64_t, std::int64_t)>& fn, std::int64_t begin,
           std::int64_t grain, int nchunks) {
    std::unique_lock<std::mutex> submit(submit_mutex_, std::try_to_lock);
    if (!submit.owns_lock() || threads_ == 1) {
      // Nested or concurrent use degrades to inline execution.
      for (int c = 0; c < nchunks; ++c) {
        const std::int64_t b = begin + static_cast<std::int64_t>(c) * grain;
        fn(c, b, b + grain);
      }
      return;
    }
    if (workers_.empty()) spawn_workers();
    {
      std::lock_guard<std::mutex> lock(job_mutex_);
      fn_ = &fn;
      begin_ = begin;
      grain_ = grain;
      nchunks_ = nchunks;
      next_.store(0, std::memory_order_relaxed);
      completed_.store(0, std::memory_order_relaxed);
      job_open_ = true;
      ++generation_;
    }
    cv_.notify_all();
    work_on();
    while (completed_.load(std::memory_order_acquire) < nchunks_) std::this_thread::yield();
    {
      std::lock_guard<std::mutex> lock(job_mutex_);
      job_open_ = false;
    }
    // Late workers may still be probing the chunk counter; wait them out so
    // fn_ stays valid for as long as anyone can dereference it.
    while (workers_in_job_.load(std::memory_order_acquire) > 0) std::this_thread::yield();
  }

 private:
  Pool() {
    const unsigned hw = std::thread::hardware_concurrency();
    threads_ = hw > 0 ? static_cast<int>(hw) : 1;
    spawn_workers();
  }

  ~Pool() { shutdown_workers(); }

  void work_on() {
    const auto* fn = fn_;
    for (;;) {
      const int c = next_.fetch_add(1, std::memory_order_relaxed);
      if (c >= nchunks_) break;
      const std::int64_t b = begin_ + static_cast<std::int64_t>(c) * grain_;
      (*fn)(c, b, b + grain_);
      completed_.fetch_add(1, std::memory_order_release);
    }
  }

  void spawn_workers() {
    stop_ = false;
    for (int i = 0; i < threads_ - 1; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  void shutdown_workers() {
    {
      std::lock_guard<std::mutex> lock(job_mutex_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
    workers_.clear();
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      bool participate = false;
      {
        std::unique_lock<std::mutex> lock(job_mutex_);
        cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        if (job_open_) {
          workers_in_job_.fetch_add(1, std::memory_order_acq_rel);
          participate = true;
        }
      }
      if (participate) {
        work_on();
        workers_in_job_.fetch_sub(1, std::memory_order_acq_rel);
      }
    }
  }

  int threads_ = 1;
  std::vector<std::thread> workers_;
  std::mutex submit_mutex_;

  std::mutex job_mutex_;
  std::condition_variable cv_;
  std::uint64_t generation_ = 0;
  bool job_open_ = false;
  bool stop_ = false;

  const std::function<void(int, std::int64_t, std::int64_t)>* fn_ = nullptr;
  std::int64_t begin_ = 0;
  std::int64_t grain_ = 1;
  int nchunks_ = 0;
  std::atomic<int> next_{0};
  std::atomic<int> completed_{0};
  std::atomic<int> workers_in_job_{0};
};

}  // namespace

int worker_count() { return Pool::instance().threads(); }

void set_worker_count(int n) { Pool::instance().set_threads(n); }

void parallel_chunks(std::int64_t begin, std::int64_t end, std::int64_t grain,
                     const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
  if (end <= begin) return;
  if (grain < 1) grain = 1;
  const int nchunks = chunk_count(begin, end, grain);
  const std::function<void(int, std::int64_t, std::int64_t)> clamped =
      [&](int c, std::int64_t b, std::int64_t e) { fn(c, b, e < end ? e : end); };
  if (nchunks == 1) {
    clamped(0, begin, begin + grain);
    return;
  }
  Pool::instance().run(clamped, begin, grain, nchunks);
}

void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t)>& fn) {
  const std::int64_t n = end - begin;
  if (n <= 0) return;
  std::int64_t grain = n / (static_cast<std::int64_t>(worker_count()) * 8);
  if (grain < 1) grain = 1;
  parallel_chunks(begin, end, grain, [&](int, std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) fn(i);
  });
}

}  // namespace voxfuse
