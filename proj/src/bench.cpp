#include "fastmnmf/bench.hpp"

#include "fastmnmf/dist.hpp"
#include "fastmnmf/fastmnmf.hpp"

#include <cmath>

namespace fastmnmf {

ObsTensor random_observations(int num_bins, int num_frames, int num_channels,
                              std::uint64_t seed) {
  ObsTensor x(num_bins, num_frames, num_channels);
  Rng rng = derive_rng(seed, "observations");
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < num_bins; ++i)
    for (int j = 0; j < num_frames; ++j)
      for (int m = 0; m < num_channels; ++m)
        x.bins[i](m, j) = cplx(rng.gaussian(), rng.gaussian()) * inv_sqrt2;
  return x;
}

namespace {

struct Timed {
  double total = 0;
  StageSeconds stages;
  OpCounts ops;
};

// warm-up pass first, then the timed run
template <typename RunFit>
Timed timed_run(const RunFit& run, int iters) {
  run(1);
  const FitReport report = run(iters);
  Timed t;
  t.total = report.total_seconds();
  t.stages = report.stages;
  t.ops = report.ops;
  return t;
}

BenchResult summarize(const std::string& method, const BenchDims& dims, int iters,
                      const std::vector<Timed>& runs) {
  BenchResult r;
  r.method = method;
  r.dims = dims;
  r.iterations = iters;
  r.repeats = static_cast<int>(runs.size());
  r.total_min = std::numeric_limits<double>::infinity();
  r.total_max = 0;
  double sum = 0, sum2 = 0;
  for (const auto& t : runs) {
    sum += t.total;
    sum2 += t.total * t.total;
    r.total_min = std::min(r.total_min, t.total);
    r.total_max = std::max(r.total_max, t.total);
    r.stages += t.stages;
    r.ops += t.ops;
  }
  const double n = static_cast<double>(runs.size());
  r.total_mean = sum / n;
  const double var = std::max(0.0, sum2 / n - r.total_mean * r.total_mean);
  r.total_se = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
  r.stages.w_update /= n;
  r.stages.mm_update /= n;
  r.stages.eta /= n;
  r.stages.decorrelate /= n;
  r.ops.w_update /= n;
  r.ops.mm_update /= n;
  return r;
}

}  // namespace

std::vector<BenchResult> bench_methods(const BenchDims& dims, int iters, int repeats,
                                       std::uint64_t seed) {
  if (repeats < 1) throw std::invalid_argument("bench_methods: repeats must be >= 1");
  const BlockLayout layout(dims.partition);
  const ObsTensor x =
      random_observations(dims.num_bins, dims.num_frames, dims.num_channels(), seed);
  const ObsTensor x1 = extract_block(x, layout, 0);

  const InitBundle init_full_b = random_init(dims.num_bins, dims.num_frames,
                                             BlockLayout::full(layout.total), dims.num_sources,
                                             dims.k_bases, seed);
  const InitBundle init_dist_b = random_init(dims.num_bins, dims.num_frames, layout,
                                             dims.num_sources, dims.k_bases, seed);
  const InitBundle init_single_b = slice_init(init_dist_b, 0);

  auto run_full = [&](int n) { return fit_full(x, init_full_b, n).report; };
  auto run_single = [&](int n) { return fit_single(x1, init_single_b, n).report; };
  auto run_dist = [&](int n) { return fit_distributed(x, layout, init_dist_b, n, true).report; };

  std::vector<Timed> full_runs, single_runs, dist_runs;
  for (int rep = 0; rep < repeats; ++rep) {
    single_runs.push_back(timed_run(run_single, iters));
    dist_runs.push_back(timed_run(run_dist, iters));
    full_runs.push_back(timed_run(run_full, iters));
  }
  return {summarize("single", dims, iters, single_runs),
          summarize("distributed", dims, iters, dist_runs),
          summarize("full", dims, iters, full_runs)};
}

namespace {

ScalingFit fit_loglog(std::vector<ScalingPoint> points) {
  ScalingFit fit;
  fit.points = std::move(points);
  const int n = static_cast<int>(fit.points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : fit.points) {
    const double lx = std::log(static_cast<double>(p.size));
    const double ly = std::log(std::max(p.w_stage_seconds, 1e-12));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / n;
  double rss = 0;
  for (const auto& p : fit.points) {
    const double lx = std::log(static_cast<double>(p.size));
    const double ly = std::log(std::max(p.w_stage_seconds, 1e-12));
    const double r = ly - (fit.intercept + fit.slope * lx);
    rss += r * r;
  }
  fit.residual_rms = std::sqrt(rss / n);
  return fit;
}

}  // namespace

ScalingFit bench_scaling_full(const std::vector<int>& m_grid, int num_bins, int num_frames,
                              int num_sources, int k_bases, int iters, std::uint64_t seed) {
  if (m_grid.size() < 4) throw InsufficientGrid("bench_scaling_full: need at least 4 sizes");
  std::vector<ScalingPoint> points;
  for (int m : m_grid) {
    const ObsTensor x = random_observations(num_bins, num_frames, m, seed);
    const InitBundle init =
        random_init(num_bins, num_frames, BlockLayout::full(m), num_sources, k_bases, seed);
    auto run = [&](int n) { return fit_full(x, init, n).report; };
    const Timed t = timed_run(run, iters);
    points.push_back({m, t.stages.w_update / iters});
  }
  return fit_loglog(std::move(points));
}

ScalingFit bench_scaling_dist(const std::vector<int>& l_grid, int subarray_size, int num_bins,
                              int num_frames, int num_sources, int k_bases, int iters,
                              std::uint64_t seed) {
  if (l_grid.size() < 4) throw InsufficientGrid("bench_scaling_dist: need at least 4 sizes");
  std::vector<ScalingPoint> points;
  for (int l : l_grid) {
    const BlockLayout layout(std::vector<int>(l, subarray_size));
    const ObsTensor x = random_observations(num_bins, num_frames, layout.total, seed);
    const InitBundle init =
        random_init(num_bins, num_frames, layout, num_sources, k_bases, seed);
    auto run = [&](int n) { return fit_distributed(x, layout, init, n, true).report; };
    const Timed t = timed_run(run, iters);
    points.push_back({l, t.stages.w_update / iters});
  }
  return fit_loglog(std::move(points));
}

}  // namespace fastmnmf
