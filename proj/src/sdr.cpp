#include "fastmnmf/sdr.hpp"

#include <algorithm>
#include <numeric>

namespace fastmnmf {

namespace {

// correlation of s against itself at lags 0..len-1, zero-padded outside
Eigen::VectorXd autocorr(const Eigen::VectorXd& s, int len) {
  const Eigen::Index t_len = s.size();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(len);
  for (int lag = 0; lag < len; ++lag)
    r(lag) = s.tail(t_len - lag).dot(s.head(t_len - lag));
  return r;
}

Eigen::VectorXd crosscorr(const Eigen::VectorXd& est, const Eigen::VectorXd& ref, int len) {
  const Eigen::Index t_len = ref.size();
  Eigen::VectorXd rho(len);
  for (int lag = 0; lag < len; ++lag)
    rho(lag) = est.tail(t_len - lag).dot(ref.head(t_len - lag));
  return rho;
}

std::vector<int> best_assignment(const Eigen::MatrixXd& score) {
  const int n = static_cast<int>(score.rows());
  std::vector<int> best(n);
  if (n <= 6) {
    // lexicographic enumeration keeps the smallest permutation on ties
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    double top = -std::numeric_limits<double>::infinity();
    do {
      double s = 0;
      for (int r = 0; r < n; ++r) s += score(r, perm[r]);
      if (s > top) {
        top = s;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  if (n > 20) throw std::invalid_argument("sdr_permuted: too many sources");
  // subset DP over assigned estimates
  const int full = 1 << n;
  std::vector<double> val(full, -std::numeric_limits<double>::infinity());
  std::vector<int> choice(full, -1);
  val[0] = 0;
  for (int mask = 0; mask < full - 1; ++mask) {
    if (val[mask] == -std::numeric_limits<double>::infinity()) continue;
    const int r = __builtin_popcount(static_cast<unsigned>(mask));
    for (int c = 0; c < n; ++c) {
      if (mask & (1 << c)) continue;
      const int next = mask | (1 << c);
      const double s = val[mask] + score(r, c);
      if (s > val[next]) {
        val[next] = s;
        choice[next] = c;
      }
    }
  }
  int mask = full - 1;
  for (int r = n - 1; r >= 0; --r) {
    best[r] = choice[mask];
    mask ^= 1 << best[r];
  }
  return best;
}

}  // namespace

SdrProjector::SdrProjector(Eigen::VectorXd reference, int filter_len)
    : ref_(std::move(reference)), filter_len_(filter_len) {
  if (filter_len_ < 1) throw std::invalid_argument("SdrProjector: filter_len must be positive");
  if (ref_.size() < static_cast<Eigen::Index>(filter_len_) * 4)
    throw std::invalid_argument("SdrProjector: signal shorter than 4x the filter length");
  if (ref_.norm() == 0.0) throw DegenerateReference("SdrProjector: all-zero reference");
  const Eigen::VectorXd r = autocorr(ref_, filter_len_);
  Eigen::MatrixXd toeplitz(filter_len_, filter_len_);
  for (int a = 0; a < filter_len_; ++a)
    for (int b = 0; b < filter_len_; ++b) toeplitz(a, b) = r(std::abs(a - b));
  toeplitz.diagonal().array() += 1e-10 * r(0);
  llt_.compute(toeplitz);
  if (llt_.info() != Eigen::Success)
    throw DegenerateReference("SdrProjector: reference autocorrelation not factorizable");
}

double SdrProjector::score(const Eigen::VectorXd& estimate) const {
  if (estimate.size() != ref_.size())
    throw ShapeMismatch("SdrProjector: estimate length differs from the reference");
  const Eigen::VectorXd f = llt_.solve(crosscorr(estimate, ref_, filter_len_));
  // projection and residual over the full convolution support, where the
  // Toeplitz normal equations are the exact least-squares system
  const Eigen::Index t_len = ref_.size();
  Eigen::VectorXd proj = Eigen::VectorXd::Zero(t_len + filter_len_ - 1);
  for (int a = 0; a < filter_len_; ++a) proj.segment(a, t_len) += f(a) * ref_;
  Eigen::VectorXd err = -proj;
  err.head(t_len) += estimate;
  const double p = proj.squaredNorm();
  const double e = err.squaredNorm();
  if (p <= 0.0) return -300.0;
  return 10.0 * std::log10(p / std::max(e, p * 1e-30));
}

double sdr(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate, int filter_len) {
  return SdrProjector(reference, filter_len).score(estimate);
}

SdrReport sdr_permuted(const std::vector<Eigen::VectorXd>& refs,
                       const std::vector<Eigen::VectorXd>& ests, int filter_len) {
  if (refs.size() != ests.size() || refs.empty())
    throw ShapeMismatch("sdr_permuted: need equally many references and estimates");
  const int n = static_cast<int>(refs.size());
  Eigen::MatrixXd score(n, n);
  for (int r = 0; r < n; ++r) {
    SdrProjector proj(refs[r], filter_len);
    for (int c = 0; c < n; ++c) score(r, c) = proj.score(ests[c]);
  }
  SdrReport out;
  out.permutation = best_assignment(score);
  out.sdr_db.resize(n);
  for (int r = 0; r < n; ++r) out.sdr_db[r] = score(r, out.permutation[r]);
  return out;
}

SdrReport sdr_improvement(const Eigen::VectorXd& mixture_at_ref,
                          const std::vector<Eigen::VectorXd>& true_images_at_ref,
                          const std::vector<Eigen::VectorXd>& est_images_at_ref,
                          int filter_len) {
  if (true_images_at_ref.size() != est_images_at_ref.size() || true_images_at_ref.empty())
    throw ShapeMismatch("sdr_improvement: reference/estimate count mismatch");
  const int n = static_cast<int>(true_images_at_ref.size());
  Eigen::MatrixXd score(n, n);
  std::vector<double> baseline(n);
  for (int r = 0; r < n; ++r) {
    SdrProjector proj(true_images_at_ref[r], filter_len);
    baseline[r] = proj.score(mixture_at_ref);
    for (int c = 0; c < n; ++c) score(r, c) = proj.score(est_images_at_ref[c]);
  }
  SdrReport out;
  out.permutation = best_assignment(score);
  out.baseline_db = std::move(baseline);
  out.sdr_db.resize(n);
  out.improvement_db.resize(n);
  double mean = 0;
  for (int r = 0; r < n; ++r) {
    out.sdr_db[r] = score(r, out.permutation[r]);
    out.improvement_db[r] = out.sdr_db[r] - out.baseline_db[r];
    mean += out.improvement_db[r];
  }
  out.mean_improvement_db = mean / n;
  return out;
}

TraceResult trace_run(const std::function<FitReport(const FitOptions&)>& run_fit,
                      const std::function<double(const FitSnapshot&)>& score, int eval_every,
                      double floor) {
  TraceResult out;
  FitOptions options;
  options.floor = floor;
  options.eval_every = eval_every;
  if (eval_every > 0 && score) {
    options.on_eval = [&](const FitSnapshot& snap) {
      TraceRow row;
      row.iteration = snap.iteration;
      row.seconds = snap.elapsed_seconds;
      row.cost = snap.cost;
      row.mean_sdr_improvement = score(snap);
      out.rows.push_back(row);
    };
  }
  out.report = run_fit(options);
  return out;
}

}  // namespace fastmnmf
