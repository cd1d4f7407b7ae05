// bss-eval style source-to-distortion ratio: the allowed distortion is an FIR
// filter of the reference, fitted by Toeplitz least squares; global source
// permutation by maximizing the summed SDR.
#pragma once

#include "fastmnmf/model.hpp"

namespace fastmnmf {

inline constexpr int kSdrFilterLen = 512;

/// SDR in dB of `estimate` against `reference` with a filter_len-tap allowed
/// distortion filter. Throws DegenerateReference for an all-zero reference.
double sdr(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate,
           int filter_len = kSdrFilterLen);

/// Caches the reference autocorrelation factorization so many estimates can be
/// scored against one reference cheaply.
class SdrProjector {
 public:
  SdrProjector(Eigen::VectorXd reference, int filter_len);
  double score(const Eigen::VectorXd& estimate) const;

 private:
  Eigen::VectorXd ref_;
  int filter_len_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

struct SdrReport {
  std::vector<double> sdr_db;          // per source, after permutation
  std::vector<int> permutation;        // estimate index assigned to each reference
  std::vector<double> baseline_db;     // SDR of the unprocessed mixture (when given)
  std::vector<double> improvement_db;  // sdr_db - baseline_db
  double mean_improvement_db = 0.0;
};

/// Scores every (reference, estimate) pair and picks the assignment with the
/// largest total SDR; exhaustive for up to six sources, subset-DP beyond.
SdrReport sdr_permuted(const std::vector<Eigen::VectorXd>& refs,
                       const std::vector<Eigen::VectorXd>& ests, int filter_len = kSdrFilterLen);

/// SDR improvement of the estimates over the mixture, per source and mean.
SdrReport sdr_improvement(const Eigen::VectorXd& mixture_at_ref,
                          const std::vector<Eigen::VectorXd>& true_images_at_ref,
                          const std::vector<Eigen::VectorXd>& est_images_at_ref,
                          int filter_len = kSdrFilterLen);

struct TraceRow {
  int iteration = 0;
  double seconds = 0;  // cumulative estimation time, evaluation excluded
  double cost = 0;
  double mean_sdr_improvement = 0;
};

struct TraceResult {
  FitReport report;
  std::vector<TraceRow> rows;
};

/// Runs an estimator with periodic snapshot scoring. The estimator clock is
/// paused while `score` runs, so the traced time covers estimation only.
TraceResult trace_run(const std::function<FitReport(const FitOptions&)>& run_fit,
                      const std::function<double(const FitSnapshot&)>& score, int eval_every,
                      double floor = kFloor);

}  // namespace fastmnmf
