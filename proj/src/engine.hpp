// Internal estimator kernels. fit_full, fit_single and fit_distributed all run
// the same engine; the full-array case is the single-block layout, which makes
// the L=1 reduction exact by construction.
#pragma once

#include "fastmnmf/init.hpp"
#include "fastmnmf/model.hpp"

namespace fastmnmf::detail {

using CMats = std::vector<Eigen::MatrixXcd>;
using RMats = std::vector<Eigen::MatrixXd>;

// One iterative-projection column update, across all bins.
void ip_sweep_column(const ObsTensor& x, const RMats& eta, const BlockLayout& layout, int block,
                     CMats& w_block, int mu, double floor, OpCounts* ops = nullptr);

// y rows of one block and |y|^2 columns refreshed in place.
void decorrelate_block_into(const ObsTensor& x, const BlockLayout& layout, int block,
                            const CMats& w_block, CMats& y, RMats* pow_y);

RMats spectrogram(const NmfModel& model);  // per bin J x N

void eta_from(const RMats& h, const RMats& lambda, RMats& eta, double floor);

// Per-source I x J numerator/denominator weights shared by the t and v updates:
//   a = sum_m Lambda(n,m) |y|^2 eta^-2,  b = sum_m Lambda(n,m) eta^-1.
void build_tv_weights(const RMats& lambda, const RMats& pow_y, const RMats& eta, RMats& a,
                      RMats& b, OpCounts* ops = nullptr);

void update_t(NmfModel& model, const RMats& a, const RMats& b, double floor,
              OpCounts* ops = nullptr);
void update_v(NmfModel& model, const RMats& a, const RMats& b, double floor,
              OpCounts* ops = nullptr);
void update_lambda(RMats& lambda, const RMats& h, const RMats& pow_y, const RMats& eta,
                   double floor, OpCounts* ops = nullptr);

// sum_ijm(|y|^2 / max(eta, floor) + ln max(eta_raw, 1e-300)) with eta_raw = h * Lambda.
double power_term(const RMats& pow_y, const RMats& h, const RMats& lambda, double floor);

// sum_i ln|det W_i|^2 for one block; -inf when a factor is singular (the fit
// loop records the resulting +inf cost and keeps going; the public cost
// functions turn it into SingularDemixer).
double logdet_term(const CMats& w_block);

struct EngineResult {
  NmfModel nmf;
  std::vector<std::vector<Eigen::MatrixXcd>> w_blocks;
  RMats lambda;
  FitReport report;
};

// Shared-spectrogram fit over an arbitrary block layout.
EngineResult run_engine(const ObsTensor& x, const BlockLayout& layout, const InitBundle& init,
                        int iters, const FitOptions& options);

}  // namespace fastmnmf::detail
