// Model state shared by the full-array, single-subarray and distributed
// estimators. All tensors are stored per frequency bin:
//   T[n] is I x K, V[n] is K x J, Lambda[i] is N x M, W[i] is M x M.
#pragma once

#include "fastmnmf/rng.hpp"
#include "fastmnmf/types.hpp"

#include <functional>

namespace fastmnmf {

/// NMF spectrogram model h_ijn = sum_k t_ikn v_kjn.
struct NmfModel {
  std::vector<Eigen::MatrixXd> T;  // per source: I x K spectral bases
  std::vector<Eigen::MatrixXd> V;  // per source: K x J activations
  int K = 0;

  int num_sources() const { return static_cast<int>(T.size()); }
  int num_bins() const { return T.empty() ? 0 : static_cast<int>(T[0].rows()); }
  int num_frames() const { return V.empty() ? 0 : static_cast<int>(V[0].cols()); }

  /// Random positive factors with entries in [floor, 1 + floor).
  static NmfModel random(int num_bins, int num_frames, int num_sources, int k, Rng& rng,
                         double floor = kFloor);
};

/// Full-array spatial model: demixer W_i (columns w_im) and the diagonalized
/// SCM entries Lambda[i](n, m) = [Lambda_in]_mm.
struct SpatialModel {
  std::vector<Eigen::MatrixXcd> W;      // per bin: M x M
  std::vector<Eigen::MatrixXd> Lambda;  // per bin: N x M, nonnegative

  int num_channels() const { return W.empty() ? 0 : static_cast<int>(W[0].rows()); }
};

/// Block-diagonal spatial model; one demixer per subarray per bin.
struct BlockSpatialModel {
  BlockLayout layout;
  std::vector<std::vector<Eigen::MatrixXcd>> W;  // [block][bin]: M(l) x M(l)
  std::vector<Eigen::MatrixXd> Lambda;           // per bin: N x M (full channel axis)

  Eigen::MatrixXcd assembled_w(int bin) const;

  /// View of one block as a standalone full-array model (Lambda columns sliced).
  SpatialModel block_model(int block) const;
};

struct StageSeconds {
  double w_update = 0, mm_update = 0, eta = 0, decorrelate = 0;
  StageSeconds& operator+=(const StageSeconds& o) {
    w_update += o.w_update;
    mm_update += o.mm_update;
    eta += o.eta;
    decorrelate += o.decorrelate;
    return *this;
  }
};

struct OpCounts {
  double w_update = 0, mm_update = 0;
  OpCounts& operator+=(const OpCounts& o) {
    w_update += o.w_update;
    mm_update += o.mm_update;
    return *this;
  }
};

struct FitReport {
  std::vector<double> cost_trace;    // length iterations + 1 (initial cost first)
  std::vector<double> wall_seconds;  // per iteration, evaluation callbacks excluded
  int iterations = 0;
  StageSeconds stages;
  OpCounts ops;

  double total_seconds() const {
    double s = 0;
    for (double w : wall_seconds) s += w;
    return s;
  }
};

/// Read-only view of the estimator state handed to evaluation callbacks.
struct FitSnapshot {
  int iteration = 0;
  double cost = 0;
  double elapsed_seconds = 0;
  const BlockLayout* layout = nullptr;
  std::vector<const NmfModel*> models;  // one entry when spectrograms are shared
  const std::vector<std::vector<Eigen::MatrixXcd>>* w_blocks = nullptr;
  const std::vector<Eigen::MatrixXd>* lambda = nullptr;
  bool shared = true;
};

struct FitOptions {
  double floor = kFloor;
  int eval_every = 0;  // 0 disables callbacks; callback time is excluded from wall_seconds
  std::function<void(const FitSnapshot&)> on_eval;
};

}  // namespace fastmnmf
