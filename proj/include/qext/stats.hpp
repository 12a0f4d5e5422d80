#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <thread>

#include "qext/config.hpp"

namespace qext::stats {

// runs fn(0..n-1) on a worker pool; results land by index, so the output does
// not depend on the thread count
template <class T>
std::vector<T> parallel_map(size_t n, uint32_t threads, const std::function<T(size_t)>& fn) {
  std::vector<T> out(n);
  if (n == 0) return out;
  threads = std::max<uint32_t>(1, std::min<uint32_t>(threads, uint32_t(n)));
  if (threads == 1) {
    for (size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (uint32_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next++;
        if (i >= n) return;
        try {
          out[i] = fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> g(mu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  return out;
}

// per-trial session seed
inline seed32 trial_seed(const seed32& base, std::string_view experiment, uint64_t i) {
  writer w;
  w.u64(i);
  return derive_seed(base, std::string("trial/") + std::string(experiment), w.data());
}

// nearest-rank percentile
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  size_t rank = size_t(std::ceil(p / 100.0 * double(v.size())));
  rank = std::clamp<size_t>(rank, 1, v.size());
  return v[rank - 1];
}

inline json histogram(const std::vector<uint32_t>& v) {
  std::map<uint32_t, uint32_t> h;
  for (auto x : v) ++h[x];
  json out = json::object();
  for (auto& [k, c] : h) out[std::to_string(k)] = c;
  return out;
}

// two-sample chi-square homogeneity test on binned counts; bins empty in both
// samples are dropped, sparse tails are pooled until the expected count is >= 5
struct chi2_result {
  double statistic = 0;
  uint32_t dof = 0;
  double p_value = 1;
  uint32_t bins_used = 0;
};

inline chi2_result chi2_homogeneity(const std::vector<uint64_t>& a, const std::vector<uint64_t>& b) {
  if (a.size() != b.size()) throw argument_error("chi2: histograms differ in size");
  double na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) na += double(a[i]), nb += double(b[i]);
  chi2_result res;
  if (na == 0 || nb == 0) return res;
  // pool adjacent bins, in index order, until each pooled bin is large enough
  std::vector<std::pair<double, double>> cells;
  double ca = 0, cb = 0;
  auto small = [&](double x, double y) {
    double tot = x + y, n = na + nb;
    return std::min(tot * na / n, tot * nb / n) < 5.0;
  };
  for (size_t i = 0; i < a.size(); ++i) {
    ca += double(a[i]), cb += double(b[i]);
    if (!small(ca, cb)) {
      cells.push_back({ca, cb});
      ca = cb = 0;
    }
  }
  if (ca + cb > 0) {
    if (cells.empty()) cells.push_back({ca, cb});
    else cells.back().first += ca, cells.back().second += cb;
  }
  res.bins_used = uint32_t(cells.size());
  if (cells.size() < 2) return res;
  double n = na + nb;
  for (auto [x, y] : cells) {
    double tot = x + y, ea = tot * na / n, eb = tot * nb / n;
    res.statistic += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
  }
  res.dof = uint32_t(cells.size() - 1);
  boost::math::chi_squared dist(res.dof);
  res.p_value = boost::math::cdf(boost::math::complement(dist, res.statistic));
  return res;
}

// largest |z| of per-position bit frequencies against 1/2
inline double max_bit_z(const std::vector<uint64_t>& ones, uint64_t samples) {
  double worst = 0;
  if (samples == 0) return 0;
  double sd = std::sqrt(double(samples) * 0.25);
  for (auto o : ones) worst = std::max(worst, std::abs(double(o) - double(samples) / 2) / sd);
  return worst;
}

// two-sided p-value of a standard normal statistic
inline double normal_p(double z) {
  boost::math::normal n;
  return 2 * boost::math::cdf(boost::math::complement(n, std::abs(z)));
}

class stopwatch {
 public:
  stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

// everything but the timing block is a function of (config, seed)
struct report {
  std::string experiment;
  uint32_t trials = 0;
  json config;
  json counts = json::object();
  json rates = json::object();
  json histograms = json::object();
  json p_values = json::object();
  json extra = json::object();
  std::vector<double> times_ms;
  bool passed = true;
  std::vector<std::string> failures;

  void fail(std::string why) {
    passed = false;
    failures.push_back(std::move(why));
  }

  json to_json(bool with_timing = false) const {
    json out = {{"experiment", experiment}, {"trials", trials}, {"counts", counts},
                {"rates", rates},           {"histograms", histograms}, {"p_values", p_values}};
    if (!extra.empty()) out["extra"] = extra;
    out["passed"] = passed;
    out["failures"] = failures;
    if (with_timing) {
      out["timing"] = {{"p50_ms", percentile(times_ms, 50)},
                       {"p90_ms", percentile(times_ms, 90)},
                       {"p99_ms", percentile(times_ms, 99)}};
    }
    out["config"] = config;
    return out;
  }
};

}  // namespace qext::stats
