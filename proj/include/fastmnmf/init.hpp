// Initialization pipeline: bin-wise clustering masks, permutation alignment
// within and across subarrays, soft-mask source images, ML-style initial
// spectrograms, Itakura-Saito NMF warm start and GEVD spatial initialization.
#pragma once

#include "fastmnmf/model.hpp"

namespace fastmnmf {

/// Time-frequency soft masks, J x N per bin; rows sum to one.
struct SoftMask {
  std::vector<Eigen::MatrixXd> bins;

  int num_bins() const { return static_cast<int>(bins.size()); }
  int num_frames() const { return bins.empty() ? 0 : static_cast<int>(bins[0].rows()); }
  int num_sources() const { return bins.empty() ? 0 : static_cast<int>(bins[0].cols()); }
};

struct MaskOptions {
  int kmeans_iters = 50;
  double softmax_temperature = 1.0;
  int align_neighborhood = 3;
  int align_rounds = 10;
};

/// Bin-wise k-means soft masks followed by frequency-permutation alignment.
/// Degenerate bins (silent, or fewer usable frames than sources) fall back to
/// the uniform mask.
SoftMask cluster_masks(const ObsTensor& x, int num_sources, std::uint64_t seed,
                       const MaskOptions& options = {});

/// Aligns per-bin source labels: a greedy local pass against neighboring bins,
/// then global rounds against one centroid sequence per source.
void align_frequency_permutations(SoftMask& mask, const MaskOptions& options = {});

/// Chooses, for each subarray beyond the first, the source permutation that
/// maximizes the summed Pearson correlation with subarray 1's masks.
/// permutations[l][n] gives the source of mask l matched to source n of mask 0.
std::vector<std::vector<int>> align_subarray_permutations(const std::vector<SoftMask>& masks);

/// Applies a source permutation to a mask (column gather).
SoftMask permute_mask(const SoftMask& mask, const std::vector<int>& permutation);

/// c_ijn = mask_ijn * x_ij; the images of all sources add up to x exactly.
std::vector<ObsTensor> soft_mask_images(const ObsTensor& x, const SoftMask& mask);

/// Sample spatial covariances R_in = sum_j c c^H / J of the masked images.
std::vector<std::vector<Eigen::MatrixXcd>> init_scm(const std::vector<ObsTensor>& images);

/// h_ijn = c^H R_in^{-1} c / M with a relative ridge on R before inversion.
std::vector<Eigen::MatrixXd> init_spectrogram(
    const std::vector<ObsTensor>& images,
    const std::vector<std::vector<Eigen::MatrixXcd>>& r_init);

/// Multiplicative-update NMF under the Itakura-Saito divergence, one
/// factorization per source, seeded random positive start. When given,
/// divergence_trace receives per-source divergence values per iteration.
NmfModel itakura_saito_nmf(const std::vector<Eigen::MatrixXd>& h0, int k, int max_iters,
                           std::uint64_t seed,
                           std::vector<std::vector<double>>* divergence_trace = nullptr);

/// GEVD of (R_{N-1}, R_N) per bin and block; Lambda from ddiag of the
/// congruence transform, for every source.
void init_spatial(const std::vector<std::vector<Eigen::MatrixXcd>>& r_init,
                  const BlockLayout& layout,
                  std::vector<std::vector<Eigen::MatrixXcd>>& w0,
                  std::vector<Eigen::MatrixXd>& lambda0);

struct InitBundle {
  BlockLayout layout;
  NmfModel nmf;
  std::vector<std::vector<Eigen::MatrixXcd>> w0;  // [block][bin]
  std::vector<Eigen::MatrixXd> lambda0;           // per bin: N x M
  std::vector<Eigen::MatrixXd> h0;                // per bin: J x N
  std::vector<std::vector<Eigen::MatrixXcd>> r_init;  // [source][bin]
  SoftMask mask;
};

struct InitConfig {
  int num_sources = 3;
  int k_bases = 16;
  int nmf_max_iters = 1000;
  MaskOptions mask_options;
};

/// Full-array initialization: one mask over all channels.
InitBundle init_full(const ObsTensor& x, const InitConfig& cfg, std::uint64_t seed);

/// Distributed initialization: per-subarray masks aligned across subarrays,
/// block-diagonal GEVD, shared NMF warm start.
InitBundle init_distributed(const ObsTensor& x, const BlockLayout& layout, const InitConfig& cfg,
                            std::uint64_t seed);

/// Restriction of a bundle to one subarray (channels, demixer and Lambda
/// columns of that block), for fit_single and the sharing ablation.
InitBundle slice_init(const InitBundle& init, int block);

/// Random valid initialization, for tests and benchmarks.
InitBundle random_init(int num_bins, int num_frames, const BlockLayout& layout, int num_sources,
                       int k, std::uint64_t seed);

}  // namespace fastmnmf
