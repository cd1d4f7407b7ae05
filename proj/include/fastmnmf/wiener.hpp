// Multichannel Wiener filtering in the jointly diagonalized domain and
// time-domain reconstruction of the separated source images.
#pragma once

#include "fastmnmf/model.hpp"
#include "fastmnmf/stft.hpp"

namespace fastmnmf {

struct SourceImages {
  std::vector<ObsTensor> images;  // one I x J x M tensor per source
  int reference_mic = 0;

  int num_sources() const { return static_cast<int>(images.size()); }
};

/// c_ijn = W^-H diag(g_ijn) W^H x_ij with g_ijn,m = h_ijn Lambda(n,m) / eta_ijm.
/// The filters of all sources sum to the identity wherever the eta floor is
/// inactive, so the images add up to the observation.
SourceImages wiener_full(const ObsTensor& x, const NmfModel& model, const SpatialModel& spatial,
                         double floor = kFloor);

/// Per-subarray Wiener filtering; channels of block l are filtered with that
/// block's demixer and Lambda columns only.
SourceImages wiener_block(const ObsTensor& x, const std::vector<NmfModel>& models,
                          const BlockSpatialModel& spatial, double floor = kFloor);

/// Inverse STFT of every source image; returns one out_len x M waveform per source.
std::vector<Eigen::MatrixXd> reconstruct(const SourceImages& images, const StftConfig& cfg,
                                         int out_len);

}  // namespace fastmnmf
