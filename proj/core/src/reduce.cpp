#include "tpflow/reduce.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace tpflow::reduce {
namespace {

std::atomic<int> g_threads{0};

int detect_threads() {
  const char* env = std::getenv("TPFLOW_THREADS");
  if (env != nullptr) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1 && v <= 256) return static_cast<int>(v);
  }
  return 1;
}

double tree_sum(const double* xs, size_t n) {
  if (n <= 8) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += xs[i];
    return acc;
  }
  const size_t half = n / 2;
  return tree_sum(xs, half) + tree_sum(xs + half, n - half);
}

} // namespace

int thread_count() {
  int t = g_threads.load();
  if (t == 0) {
    t = detect_threads();
    g_threads.store(t);
  }
  return t < 1 ? 1 : (t > 256 ? 256 : t);
}

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n); }

double pairwise_sum(std::span<const double> xs) {
  return tree_sum(xs.data(), xs.size());
}

void parallel_for(int count, const std::function<void(int)>& body) {
  const int workers = std::min(thread_count(), count);
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

double parallel_block_sum(int blocks, const std::function<double(int)>& block_sum) {
  std::vector<double> partial(static_cast<size_t>(std::max(blocks, 1)), 0.0);
  parallel_for(blocks, [&](int b) { partial[static_cast<size_t>(b)] = block_sum(b); });
  return pairwise_sum(partial);
}

Eigen::MatrixXd parallel_block_matrix_sum(
    int blocks, int rows, int cols,
    const std::function<void(int, Eigen::MatrixXd&)>& block_term) {
  std::vector<Eigen::MatrixXd> partial(static_cast<size_t>(std::max(blocks, 1)),
                                       Eigen::MatrixXd::Zero(rows, cols));
  parallel_for(blocks, [&](int b) { block_term(b, partial[static_cast<size_t>(b)]); });
  // pairwise tree over blocks, in index order
  size_t n = partial.size();
  while (n > 1) {
    const size_t half = (n + 1) / 2;
    for (size_t i = 0; i + half < n; ++i) partial[i] += partial[i + half];
    n = half;
  }
  return partial[0];
}

} // namespace tpflow::reduce
