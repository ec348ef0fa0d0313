#include "ipsg/parallel.hpp"

#include <atomic>
#include <exception>
#include <vector>

#include "ipsg/sampling.hpp"

namespace ipsg {

// ---------------------------------------------------------------------------
// SharedIterate

SharedIterate::SharedIterate(Vector x1, std::int64_t k1)
    : current_(std::make_shared<const Snapshot>(Snapshot{std::move(x1), k1})) {}

void SharedIterate::claim_writer() {
  std::lock_guard lock(mu_);
  writer_ = std::this_thread::get_id();
}

void SharedIterate::publish(std::span<const double> x, std::int64_t k) {
  auto next = std::make_shared<const Snapshot>(
      Snapshot{Vector(x.begin(), x.end()), k});
  {
    std::lock_guard lock(mu_);
    if (writer_ != std::this_thread::get_id())
      throw std::logic_error("SharedIterate: publish from a non-writer thread");
    if (k <= current_->k)
      throw std::logic_error("SharedIterate: version must increase");
    current_ = std::move(next);
  }
  cv_.notify_all();
}

SharedIterate::Handle SharedIterate::read() const {
  std::lock_guard lock(mu_);
  return current_;
}

std::optional<SharedIterate::Handle> SharedIterate::wait_newer(
    std::int64_t seen) const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closed_ || current_->k > seen; });
  if (closed_) return std::nullopt;
  return current_;
}

std::int64_t SharedIterate::version() const {
  std::lock_guard lock(mu_);
  return current_->k;
}

void SharedIterate::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool SharedIterate::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

namespace {

void check_parallel(const RunConfig& cfg, RunMode expected) {
  cfg.validate();
  if (cfg.mode != expected)
    throw std::invalid_argument("run mode mismatch: expected " +
                                std::string(to_string(expected)));
  if (cfg.workers < 1)
    throw std::invalid_argument("parallel runs require workers >= 1");
}

// First failure reported by any worker.
class ErrorSlot {
 public:
  void set(int worker, std::exception_ptr e) {
    std::lock_guard lock(mu_);
    if (!error_) {
      error_ = e;
      worker_ = worker;
    }
  }
  bool has() const {
    std::lock_guard lock(mu_);
    return static_cast<bool>(error_);
  }
  [[noreturn]] void rethrow() const {
    std::lock_guard lock(mu_);
    try {
      std::rethrow_exception(error_);
    } catch (const std::exception& e) {
      throw WorkerError(worker_, e.what());
    } catch (...) {
      throw WorkerError(worker_, "unknown exception");
    }
  }

 private:
  mutable std::mutex mu_;
  std::exception_ptr error_;
  int worker_ = -1;
};

// Runs `stop` and joins every thread on scope exit, including unwinding.
class ThreadGroup {
 public:
  explicit ThreadGroup(std::function<void()> stop) : stop_(std::move(stop)) {}
  ThreadGroup(const ThreadGroup&) = delete;
  ThreadGroup& operator=(const ThreadGroup&) = delete;
  ~ThreadGroup() { join(); }

  template <typename F>
  void spawn(F&& f) {
    threads_.emplace_back(std::forward<F>(f));
  }

  void join() {
    if (stop_) stop_();
    for (auto& t : threads_)
      if (t.joinable()) t.join();
    threads_.clear();
  }

 private:
  std::function<void()> stop_;
  std::vector<std::thread> threads_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Async

Trace run_async(const RunConfig& cfg, const Problem& problem,
                const RunHooks& hooks) {
  check_parallel(cfg, RunMode::AsyncParallel);
  const int workers = cfg.workers;

  Vector x0 = resolve_initial_point(cfg, problem);
  SharedIterate shared(x0);
  shared.claim_writer();
  UpdateEngine engine(problem, cfg, std::move(x0), cfg.batch_size, 1, hooks);

  Mailbox<GradientMessage> mailbox(4 * static_cast<std::size_t>(workers));
  BatchStream stream(problem.num_samples(),
                     static_cast<std::size_t>(cfg.batch_size),
                     derive_seed(cfg.seed, streams::kBatches));
  std::mutex stream_mu;
  std::atomic<bool> stop{false};
  ErrorSlot errors;

  auto worker_loop = [&](int id) {
    try {
      std::int64_t seen = 0;
      while (!stop.load(std::memory_order_acquire)) {
        SharedIterate::Handle snap;
        if (cfg.rendezvous) {
          auto next = shared.wait_newer(seen);
          if (!next) return;
          snap = std::move(*next);
        } else {
          snap = shared.read();
        }
        seen = snap->k;
        Batch batch;
        {
          std::lock_guard lock(stream_mu);
          batch = stream.next();
        }
        if (hooks.before_gradient) hooks.before_gradient(id);
        simulate_gradient_cost(cfg.simulated_cost_ms);
        GradientMessage msg{problem.sample_subgradient(snap->x, batch.indices),
                            snap->k, id, batch.id};
        if (!mailbox.push(std::move(msg))) return;
      }
    } catch (...) {
      errors.set(id, std::current_exception());
      stop.store(true, std::memory_order_release);
      mailbox.close();
    }
  };

  std::int64_t discarded = 0;
  {
    ThreadGroup group([&] {
      stop.store(true, std::memory_order_release);
      mailbox.close();
      shared.close();
    });
    for (int w = 0; w < workers; ++w) group.spawn([&, w] { worker_loop(w); });

    while (!engine.done()) {
      auto msg = mailbox.pop();
      if (!msg) break;
      const std::int64_t k = engine.k();
      const std::int64_t tau = k - msg->based_on_k;
      if (cfg.tau_max_discard && tau > *cfg.tau_max_discard) {
        ++discarded;
        continue;
      }
      if (hooks.on_gradient) hooks.on_gradient(k, msg->based_on_k);
      engine.apply(msg->g, tau);
      shared.publish(engine.state().iterate.x_curr, engine.k());
    }
    group.join();
  }
  if (errors.has()) errors.rethrow();
  return engine.finish(discarded);
}

// ---------------------------------------------------------------------------
// Sync

Trace run_sync(const RunConfig& cfg, const Problem& problem,
               const RunHooks& hooks) {
  check_parallel(cfg, RunMode::SyncParallel);
  const int workers = cfg.workers;
  const auto W = static_cast<std::size_t>(workers);

  UpdateEngine engine(problem, cfg, resolve_initial_point(cfg, problem),
                      samples_per_update(cfg), 1, hooks);
  BatchStream stream(problem.num_samples(),
                     static_cast<std::size_t>(cfg.batch_size),
                     derive_seed(cfg.seed, streams::kBatches));

  // Round state, guarded by mu.
  std::mutex mu;
  std::condition_variable round_cv;
  std::condition_variable done_cv;
  std::int64_t generation = 0;
  std::size_t pending = 0;
  bool stop = false;
  std::vector<Batch> batches(W);
  std::vector<Vector> grads(W);
  const Vector* x_round = nullptr;
  ErrorSlot errors;

  auto worker_loop = [&](int id) {
    std::int64_t my_gen = 0;
    const auto w = static_cast<std::size_t>(id);
    for (;;) {
      {
        std::unique_lock lock(mu);
        round_cv.wait(lock, [&] { return stop || generation > my_gen; });
        if (stop) return;
        my_gen = generation;
      }
      try {
        if (hooks.before_gradient) hooks.before_gradient(id);
        simulate_gradient_cost(cfg.simulated_cost_ms);
        grads[w] = problem.sample_subgradient(*x_round, batches[w].indices);
      } catch (...) {
        errors.set(id, std::current_exception());
      }
      {
        std::lock_guard lock(mu);
        --pending;
      }
      done_cv.notify_one();
    }
  };

  {
    ThreadGroup group([&] {
      {
        std::lock_guard lock(mu);
        stop = true;
      }
      round_cv.notify_all();
    });
    for (int w = 0; w < workers; ++w) group.spawn([&, w] { worker_loop(w); });

    Vector avg(problem.dim());
    while (!engine.done()) {
      {
        std::lock_guard lock(mu);
        for (auto& b : batches) b = stream.next();
        x_round = &engine.state().iterate.x_curr;
        pending = W;
        ++generation;
      }
      round_cv.notify_all();
      {
        std::unique_lock lock(mu);
        done_cv.wait(lock, [&] { return pending == 0; });
      }
      if (errors.has()) break;

      avg = grads[0];
      for (std::size_t w = 1; w < W; ++w)
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += grads[w][i];
      if (W > 1) {
        const double inv = 1.0 / static_cast<double>(W);
        for (double& v : avg) v *= inv;
      }
      const std::int64_t k = engine.k();
      if (hooks.on_gradient) hooks.on_gradient(k, k);
      engine.apply(avg, 0);
    }
    group.join();
  }
  if (errors.has()) errors.rethrow();
  return engine.finish();
}

Trace run(const RunConfig& cfg, const Problem& problem,
          const RunHooks& hooks) {
  switch (cfg.mode) {
    case RunMode::Sequential:
      return run_sequential(cfg, problem, hooks);
    case RunMode::SyncParallel:
      return run_sync(cfg, problem, hooks);
    case RunMode::AsyncParallel:
      return run_async(cfg, problem, hooks);
  }
  throw std::invalid_argument("unknown run mode");
}

}  // namespace ipsg
