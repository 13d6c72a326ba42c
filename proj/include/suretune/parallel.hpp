#pragma once

// Seeded random streams and a static-partition parallel loop. Every
// replication draws from its own stream keyed by (seed, stream ids), so
// results do not depend on the number of worker threads.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "core.hpp"

namespace suretune {

/// Engine for one replication. Keys are hashed through seed_seq.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * keys.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto k : keys) push(k);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

/// n iid standard normals.
template <class Engine>
Vec standard_normal(Index n, Engine& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Vec out(n);
  for (Index i = 0; i < n; ++i) out[i] = z(rng);
  return out;
}

/// One draw Y = theta0 + diag(sd) Z.
template <class Engine>
Vec draw(const GaussianModel& model, Engine& rng) {
  Vec z = standard_normal(model.dim(), rng);
  const auto& noise = model.noise();
  if (noise.is_homoskedastic()) return model.theta0() + noise.sigma() * z;
  return model.theta0() + noise.sigmas().cwiseProduct(z);
}

/// Global default for worker count; 0 means hardware concurrency.
inline unsigned& default_threads() {
  static unsigned n = 1;
  return n;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested == 0) requested = default_threads();
  if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
  return requested;
}

/// Calls body(i) for i in [0, count). Each index is visited exactly once.
template <class Body>
void parallel_for(long count, unsigned threads, Body&& body) {
  threads = resolve_threads(threads);
  if (threads <= 1 || count < 2) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  threads = static_cast<unsigned>(std::min<long>(threads, count));
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const long chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const long begin = t * chunk;
    const long end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (long i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Mean and standard error of the columns of a reps x k table, reduced in row order.
inline std::vector<McEstimate> column_estimates(const Mat& table) {
  const long reps = static_cast<long>(table.rows());
  std::vector<McEstimate> out(static_cast<std::size_t>(table.cols()));
  for (Index c = 0; c < table.cols(); ++c) {
    double mean = 0.0;
    for (long r = 0; r < reps; ++r) mean += table(r, c);
    mean /= static_cast<double>(reps);
    double ss = 0.0;
    for (long r = 0; r < reps; ++r) {
      const double d = table(r, c) - mean;
      ss += d * d;
    }
    const double var = reps > 1 ? ss / static_cast<double>(reps - 1) : 0.0;
    out[static_cast<std::size_t>(c)] = {mean, std::sqrt(var / static_cast<double>(reps)), reps};
  }
  return out;
}

inline McEstimate mean_estimate(const std::vector<double>& values) {
  Mat t(static_cast<Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) t(static_cast<Index>(i), 0) = values[i];
  return column_estimates(t)[0];
}

/// sqrt(a.se^2 + b.se^2)
inline double combined_se(const McEstimate& a, const McEstimate& b) {
  return std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
}

}  // namespace suretune
