// Runtime benchmarks: method comparison on matched data and log-log scaling
// of the demixer-update stage against channel count and subarray count.
#pragma once

#include "fastmnmf/model.hpp"

#include <string>

namespace fastmnmf {

struct BenchDims {
  int num_bins = 96;
  int num_frames = 256;
  int num_sources = 3;
  int k_bases = 16;
  std::vector<int> partition = {4, 4, 4};

  int num_channels() const {
    int m = 0;
    for (int s : partition) m += s;
    return m;
  }
};

struct BenchResult {
  std::string method;
  BenchDims dims;
  int iterations = 0;
  int repeats = 0;
  double total_mean = 0, total_se = 0, total_min = 0, total_max = 0;  // seconds
  StageSeconds stages;  // mean per repeat
  OpCounts ops;
};

/// Runs full / single / distributed on the same seeded random observations
/// and the same iteration count; each repeat is preceded by an untimed
/// warm-up pass. Single-threaded.
std::vector<BenchResult> bench_methods(const BenchDims& dims, int iters, int repeats,
                                       std::uint64_t seed);

struct ScalingPoint {
  int size = 0;               // M for the full array, L for the distributed grid
  double w_stage_seconds = 0;  // per iteration
};

struct ScalingFit {
  std::vector<ScalingPoint> points;
  double slope = 0;
  double intercept = 0;
  double residual_rms = 0;  // in log space
};

/// Full-array demixer-stage time against the channel count (expected slope
/// between cubic and quartic). Throws InsufficientGrid for fewer than 4 sizes.
ScalingFit bench_scaling_full(const std::vector<int>& m_grid, int num_bins, int num_frames,
                              int num_sources, int k_bases, int iters, std::uint64_t seed);

/// Distributed demixer-stage time against the subarray count at fixed
/// subarray size (expected slope about one).
ScalingFit bench_scaling_dist(const std::vector<int>& l_grid, int subarray_size, int num_bins,
                              int num_frames, int num_sources, int k_bases, int iters,
                              std::uint64_t seed);

/// Seeded complex Gaussian observations for benchmarking.
ObsTensor random_observations(int num_bins, int num_frames, int num_channels,
                              std::uint64_t seed);

}  // namespace fastmnmf
