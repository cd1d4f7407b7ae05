// Distributed FastMNMF: block-diagonal spatial model, per-subarray iterative
// projection and the shared- or independent-spectrogram fit loop.
#pragma once

#include "fastmnmf/fastmnmf.hpp"

namespace fastmnmf {

/// Cost with the block-diagonal constraint, shared spectrograms. Equals
/// cost_full evaluated on the assembled block-diagonal parameters.
double cost_dist(const ObsTensor& x, const NmfModel& model, const BlockSpatialModel& spatial,
                 double floor = kFloor);

/// Independent-spectrogram variant: one NmfModel per subarray.
double cost_dist(const ObsTensor& x, const std::vector<NmfModel>& models,
                 const BlockSpatialModel& spatial, double floor = kFloor);

/// Per-subarray IP step on column mu of block `block`; Q is built from the
/// block's channels only. Identical to ip_update_w when the layout has one block.
void ip_update_block(const ObsTensor& x, const std::vector<Eigen::MatrixXd>& eta,
                     const BlockLayout& layout, int block,
                     std::vector<Eigen::MatrixXcd>& w_block, int mu, double floor = kFloor);

struct DistFit {
  std::vector<NmfModel> models;  // size 1 when spectrograms are shared, else one per block
  BlockSpatialModel spatial;
  FitReport report;
  bool shared = true;
};

/// Fits the distributed model. With share_spectrograms the NMF factors are
/// updated from all subarrays jointly; without it each subarray optimizes its
/// own copy and never exchanges information (the trajectories then match
/// fit_single on each subarray exactly).
DistFit fit_distributed(const ObsTensor& x, const BlockLayout& layout, const InitBundle& init,
                        int iters, bool share_spectrograms, const FitOptions& options = {});

}  // namespace fastmnmf
