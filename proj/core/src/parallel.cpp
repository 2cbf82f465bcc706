#include "dsfcnn/parallel.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace dsf {

namespace {

int env_thread_cap() {
  const char* v = std::getenv("DSF_THREADS");
  if (v == nullptr) return 0;
  const long n = std::strtol(v, nullptr, 10);
  return n > 0 ? static_cast<int>(n) : 1;
}

// Persistent pool; the calling thread acts as worker 0.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  int size() const { return static_cast<int>(threads_.size()) + 1; }

  void run(const std::function<void(std::int64_t, std::int64_t)>& body,
           std::int64_t n) {
    const int workers = size();
    const std::int64_t chunk = (n + workers - 1) / workers;
    {
      std::unique_lock<std::mutex> lock(mu_);
      body_ = &body;
      total_ = n;
      chunk_ = chunk;
      pending_ = static_cast<int>(threads_.size());
      ++generation_;
    }
    cv_start_.notify_all();

    run_range(0, std::min<std::int64_t>(chunk, n));

    std::unique_lock<std::mutex> lock(mu_);
    cv_done_.wait(lock, [this] { return pending_ == 0; });
    body_ = nullptr;
  }

 private:
  Pool() {
    int want = static_cast<int>(std::thread::hardware_concurrency());
    if (want <= 0) want = 1;
    const int cap = env_thread_cap();
    if (cap > 0) want = std::min(want, cap);
    for (int i = 1; i < want; ++i) {
      threads_.emplace_back([this, i] { worker_loop(i); });
    }
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void run_range(std::int64_t begin, std::int64_t end) {
    if (begin < end) (*body_)(begin, end);
  }

  void worker_loop(int index) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::int64_t, std::int64_t)>* body = nullptr;
      std::int64_t begin = 0, end = 0;
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_start_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
        body = body_;
        begin = std::min<std::int64_t>(total_, chunk_ * index);
        end = std::min<std::int64_t>(total_, begin + chunk_);
      }
      if (body != nullptr && begin < end) (*body)(begin, end);
      {
        std::unique_lock<std::mutex> lock(mu_);
        if (--pending_ == 0) cv_done_.notify_all();
      }
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_start_;
  std::condition_variable cv_done_;
  const std::function<void(std::int64_t, std::int64_t)>* body_ = nullptr;
  std::int64_t total_ = 0;
  std::int64_t chunk_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace

int worker_threads() { return Pool::instance().size(); }

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (n <= 0) return;
  if (n == 1 || worker_threads() == 1) {
    body(0, n);
    return;
  }
  Pool::instance().run(body, n);
}

}  // namespace dsf
