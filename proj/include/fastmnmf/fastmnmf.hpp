// Full-array FastMNMF: likelihood cost, iterative-projection demixer updates,
// majorization-minimization spectrogram updates and the fit loop.
#pragma once

#include "fastmnmf/init.hpp"
#include "fastmnmf/model.hpp"

namespace fastmnmf {

/// y_ij = W_i^H x_ij, one M x J matrix per bin.
std::vector<Eigen::MatrixXcd> decorrelate(const ObsTensor& x,
                                          const std::vector<Eigen::MatrixXcd>& w);

/// |y_ijm|^2 arranged J x M per bin.
std::vector<Eigen::MatrixXd> power_of(const std::vector<Eigen::MatrixXcd>& y);

/// h_ijn = sum_k t_ikn v_kjn arranged J x N per bin.
std::vector<Eigen::MatrixXd> build_spectrogram(const NmfModel& model);

/// eta_ijm = max(sum_n h_ijn Lambda[i](n,m), floor), arranged J x M per bin.
std::vector<Eigen::MatrixXd> compute_eta(const NmfModel& model,
                                         const std::vector<Eigen::MatrixXd>& lambda,
                                         double floor = kFloor);

/// Negative log-likelihood up to an additive constant:
///   sum_ijm(|y|^2/eta + ln eta) - sum_i J ln|det W_i|^2.
/// The division uses floored eta, the logarithm the raw value (clamped away
/// from zero). Throws SingularDemixer when any W_i is singular.
double cost_full(const ObsTensor& x, const NmfModel& model, const SpatialModel& spatial,
                 double floor = kFloor);

/// One iterative-projection step: rebuilds Q_im from the observations and the
/// current eta and replaces column m of every W_i. Singular systems fall back
/// to the pseudo-inverse; the normalizer is floored before the inverse root.
void ip_update_w(const ObsTensor& x, const std::vector<Eigen::MatrixXd>& eta,
                 std::vector<Eigen::MatrixXcd>& w, int m, double floor = kFloor);

// Multiplicative updates. Each call refreshes eta before returning, since the
// next update consumes it.
void mm_update_t(NmfModel& model, const std::vector<Eigen::MatrixXd>& lambda,
                 const std::vector<Eigen::MatrixXd>& pow_y, std::vector<Eigen::MatrixXd>& eta,
                 double floor = kFloor);
void mm_update_v(NmfModel& model, const std::vector<Eigen::MatrixXd>& lambda,
                 const std::vector<Eigen::MatrixXd>& pow_y, std::vector<Eigen::MatrixXd>& eta,
                 double floor = kFloor);
void mm_update_lambda(const NmfModel& model, std::vector<Eigen::MatrixXd>& lambda,
                      const std::vector<Eigen::MatrixXd>& pow_y,
                      std::vector<Eigen::MatrixXd>& eta, double floor = kFloor);

struct FullFit {
  NmfModel nmf;
  SpatialModel spatial;
  FitReport report;
};

/// Runs `iters` sweeps, each IP over all columns followed by the t, v, Lambda
/// updates. Deterministic given the initialization.
FullFit fit_full(const ObsTensor& x, const InitBundle& init, int iters,
                 const FitOptions& options = {});

/// FastMNMF restricted to one subarray: identical to fit_full on the
/// subarray's channels (callers extract the block and slice the init).
FullFit fit_single(const ObsTensor& x_subarray, const InitBundle& init, int iters,
                   const FitOptions& options = {});

}  // namespace fastmnmf
