#include "hypoflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

namespace hypoflow {

namespace {
double pairwise_range(const double* p, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += p[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_range(p, h) + pairwise_range(p + h, n - h);
}
}  // namespace

double pairwise_sum(const std::vector<double>& v) { return pairwise_range(v.data(), v.size()); }

MeanStat mean_stat(const std::vector<double>& v) {
  MeanStat s;
  s.n = static_cast<long>(v.size());
  if (v.empty()) return s;
  s.value = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return s;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - s.value) * (v[i] - s.value);
  double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
  s.stderr_ = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

Interval wilson(long k, long n, double z) {
  if (n <= 0) return {0.0, 1.0};
  double nn = static_cast<double>(n);
  double p = static_cast<double>(k) / nn;
  double z2 = z * z;
  double den = 1.0 + z2 / nn;
  double center = (p + z2 / (2.0 * nn)) / den;
  double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / den;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<double> isotonic_nonincreasing(const std::vector<double>& v) {
  struct Block {
    double sum;
    int count;
  };
  std::vector<Block> st;
  for (double x : v) {
    st.push_back({x, 1});
    while (st.size() > 1) {
      Block& b = st.back();
      Block& a = st[st.size() - 2];
      if (a.sum / a.count >= b.sum / b.count) break;
      a.sum += b.sum;
      a.count += b.count;
      st.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const Block& b : st)
    for (int i = 0; i < b.count; ++i) out.push_back(b.sum / b.count);
  return out;
}

LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  f.n = static_cast<int>(x.size());
  if (x.size() < 2) return f;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

double halton(std::size_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

int nth_prime(int i) {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};
  if (i < 0 || i >= 16) throw std::out_of_range("nth_prime: index out of range");
  return primes[i];
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HYPOFLOW_THREADS")) {
    int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    int lo = static_cast<int>(static_cast<long>(n) * t / threads);
    int hi = static_cast<int>(static_cast<long>(n) * (t + 1) / threads);
    pool.emplace_back([&, lo, hi] {
      try {
        for (int i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace hypoflow
