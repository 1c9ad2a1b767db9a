#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace hypoflow {

// Pairwise (cascade) summation. Fixed association order for a given length.
double pairwise_sum(const std::vector<double>& v);

struct MeanStat {
  double value = 0.0;
  double stderr_ = 0.0;
  long n = 0;
};

// Sample mean and standard error (sample std / sqrt(n)).
MeanStat mean_stat(const std::vector<double>& v);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// Wilson score interval for k successes out of n.
Interval wilson(long k, long n, double z = 1.96);

// Pool-adjacent-violators fit of a nonincreasing sequence (equal weights).
std::vector<double> isotonic_nonincreasing(const std::vector<double>& v);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  int n = 0;
};

LineFit least_squares_line(const std::vector<double>& x, const std::vector<double>& y);

// Radical inverse in the given base; index >= 1 recommended.
double halton(std::size_t index, int base);
int nth_prime(int i);

// Thread count: explicit value if > 0, else HYPOFLOW_THREADS, else 1.
int resolve_threads(int requested);

// Runs fn(i) for i in [0,n) on `threads` workers with static contiguous chunks.
// fn must only write to per-index storage.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace hypoflow
