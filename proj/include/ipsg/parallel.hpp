#ifndef IPSG_PARALLEL_HPP
#define IPSG_PARALLEL_HPP

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

#include "ipsg/core.hpp"
#include "ipsg/optimizer.hpp"
#include "ipsg/problems.hpp"

namespace ipsg {

/// A gradient computed by a worker at the snapshot x^(based_on_k).
struct GradientMessage {
  Vector g;
  std::int64_t based_on_k = 1;
  int worker_id = 0;
  std::int64_t batch_id = 0;
};

/// Raised on the master when a worker thread failed.
class WorkerError : public std::runtime_error {
 public:
  WorkerError(int worker, const std::string& what)
      : std::runtime_error("worker " + std::to_string(worker) +
                           " failed: " + what),
        worker_(worker) {}
  int worker() const { return worker_; }

 private:
  int worker_;
};

/// Versioned snapshot of the master iterate. The version equals the
/// iteration stamp k of x^(k). One thread (the writer) may publish; any
/// thread may read. Readers receive an immutable (x, k) pair, so a torn
/// read is impossible.
class SharedIterate {
 public:
  struct Snapshot {
    Vector x;
    std::int64_t k = 1;
  };
  using Handle = std::shared_ptr<const Snapshot>;

  SharedIterate(Vector x1, std::int64_t k1 = 1);

  /// Binds the calling thread as the only writer.
  void claim_writer();
  /// Publishes x^(k). Throws std::logic_error when called from a thread
  /// other than the writer or when k does not increase.
  void publish(std::span<const double> x, std::int64_t k);

  Handle read() const;
  /// Blocks until a version newer than `seen` exists; nullopt once closed.
  std::optional<Handle> wait_newer(std::int64_t seen) const;
  std::int64_t version() const;

  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  Handle current_;
  std::thread::id writer_;
  bool closed_ = false;
};

/// Bounded multi-producer single-consumer queue.
template <typename T>
class Mailbox {
 public:
  explicit Mailbox(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("Mailbox: capacity 0");
  }

  /// Blocks while full. Returns false (dropping the item) once closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Blocks while empty. Returns nullopt once closed; items still queued
  /// at close time are dropped.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (closed_) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  bool closed_ = false;
};

/// Master-worker asynchronous run. Workers loop over
/// (read snapshot, take next batch, compute subgradient, send); the master
/// applies messages in arrival order with tau_k = k - based_on_k, skipping
/// those staler than tau_max_discard, and stops after K applied updates.
/// The returned trace carries DelayStats including the discard count.
Trace run_async(const RunConfig& cfg, const Problem& problem,
                const RunHooks& hooks = {});

/// Synchronous rounds: every worker evaluates a batch at the same iterate,
/// the master averages the W gradients in worker order and applies one
/// update. Deterministic for a fixed config.
Trace run_sync(const RunConfig& cfg, const Problem& problem,
               const RunHooks& hooks = {});

/// Dispatches on cfg.mode.
Trace run(const RunConfig& cfg, const Problem& problem,
          const RunHooks& hooks = {});

}  // namespace ipsg

#endif  // IPSG_PARALLEL_HPP
