#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"

namespace hybrid_bhl {

using Rng = std::mt19937_64;

// Independent substream for (seed, stream, chunk). Streams separate unrelated
// experiments sharing a seed (e.g. sweep points), chunks split one experiment.
inline Rng make_substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t chunk) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(chunk), hi(chunk), 0x9e3779b9u};
  return Rng(seq);
}

// Uniform on (0, 1]; safe under log and negative powers.
inline double uniform_open0(Rng& rng) {
  return 1.0 - std::generate_canonical<double, 53>(rng);
}

// Worker count from HYBRID_BHL_WORKERS, else the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("HYBRID_BHL_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    throw InvalidArgument("HYBRID_BHL_WORKERS must be a positive integer");
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

struct McConfig {
  std::uint64_t trials = 1'000'000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  std::uint64_t chunk_size = 65536;
  unsigned workers = 0;  // 0: worker_count()
};

// Events below a threshold, and sample moments. Both merge associatively;
// chunks are merged in index order so results do not depend on workers.
struct CountAcc {
  std::uint64_t events = 0;
  std::uint64_t trials = 0;
  void merge(const CountAcc& o) {
    events += o.events;
    trials += o.trials;
  }
  Estimate estimate() const { return Estimate::proportion(events, trials); }
};

struct MeanAcc {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::uint64_t n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  void merge(const MeanAcc& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    n += o.n;
  }
  Estimate estimate() const { return Estimate::sample_mean(sum, sum_sq, n); }
};

// Runs fn(rng, n) -> Acc over ceil(trials / chunk_size) chunks, each with its
// own substream, and merges the partial results in chunk order.
template <class Acc, class ChunkFn>
Acc run_chunked(const McConfig& cfg, ChunkFn&& fn) {
  require(cfg.trials > 0, "trials must be positive");
  require(cfg.chunk_size > 0, "chunk size must be positive");
  const std::uint64_t nchunks = (cfg.trials + cfg.chunk_size - 1) / cfg.chunk_size;
  std::vector<std::optional<Acc>> parts(nchunks);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (;;) {
      const std::uint64_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      try {
        Rng rng = make_substream(cfg.seed, cfg.stream, c);
        const std::uint64_t n = std::min(cfg.chunk_size, cfg.trials - c * cfg.chunk_size);
        parts[c].emplace(fn(rng, n));
      } catch (...) {
        std::lock_guard<std::mutex> lk(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(nchunks);
        return;
      }
    }
  };

  unsigned w = cfg.workers ? cfg.workers : worker_count();
  if (w > nchunks) w = static_cast<unsigned>(nchunks);
  if (w <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Acc total{};
  for (auto& p : parts) total.merge(*p);
  return total;
}

// Collects every draw, in chunk order. Each chunk works on its own copy of
// `draw`, so a sampler captured by value keeps its caches chunk-local.
template <class Draw>
std::vector<double> collect_draws(const McConfig& cfg, const Draw& draw) {
  struct VecAcc {
    std::vector<double> v;
    void merge(const VecAcc& o) { v.insert(v.end(), o.v.begin(), o.v.end()); }
  };
  auto acc = run_chunked<VecAcc>(cfg, [&](Rng& rng, std::uint64_t n) {
    Draw local = draw;
    VecAcc a;
    a.v.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) a.v.push_back(local(rng));
    return a;
  });
  return std::move(acc.v);
}

}  // namespace hybrid_bhl
