// Core tensor and layout types shared by all estimators.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastmnmf {

using cplx = std::complex<double>;

// Single floor constant used for eta, MM denominators, IP normalizers and
// the NMF parameters themselves.
inline constexpr double kFloor = 1e-6;

struct ShapeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SingularDemixer : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SignalTooShort : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DegenerateReference : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct CoincidentPositions : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct SilentSource : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InsufficientGrid : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Complex STFT observations, one channels x frames matrix per frequency bin.
struct ObsTensor {
  std::vector<Eigen::MatrixXcd> bins;  // bins[i] is M x J

  ObsTensor() = default;
  ObsTensor(int num_bins, int num_frames, int num_channels)
      : bins(num_bins, Eigen::MatrixXcd::Zero(num_channels, num_frames)) {}

  int num_bins() const { return static_cast<int>(bins.size()); }
  int num_frames() const { return bins.empty() ? 0 : static_cast<int>(bins[0].cols()); }
  int num_channels() const { return bins.empty() ? 0 : static_cast<int>(bins[0].rows()); }

  bool all_finite() const {
    for (const auto& b : bins)
      if (!b.allFinite()) return false;
    return true;
  }
};

/// Contiguous partition of the channel axis into subarrays.
struct BlockLayout {
  std::vector<int> sizes;
  std::vector<int> offsets;  // offsets[l] = sum of sizes before block l
  int total = 0;

  BlockLayout() = default;
  explicit BlockLayout(std::vector<int> block_sizes) : sizes(std::move(block_sizes)) {
    offsets.reserve(sizes.size());
    for (int s : sizes) {
      if (s <= 0) throw std::invalid_argument("BlockLayout: block sizes must be positive");
      offsets.push_back(total);
      total += s;
    }
  }

  static BlockLayout full(int channels) { return BlockLayout(std::vector<int>{channels}); }

  int num_blocks() const { return static_cast<int>(sizes.size()); }

  // m = mu + offset of block l (all indices zero-based).
  int global_index(int block, int mu) const {
    if (block < 0 || block >= num_blocks() || mu < 0 || mu >= sizes[block])
      throw std::out_of_range("BlockLayout: (block, mu) out of range");
    return offsets[block] + mu;
  }
};

/// Extracts the rows of one subarray into a standalone tensor.
inline ObsTensor extract_block(const ObsTensor& x, const BlockLayout& layout, int block) {
  if (layout.total != x.num_channels())
    throw ShapeMismatch("extract_block: layout does not match channel count");
  ObsTensor out;
  out.bins.reserve(x.bins.size());
  for (const auto& b : x.bins)
    out.bins.push_back(b.middleRows(layout.offsets.at(block), layout.sizes.at(block)));
  return out;
}

}  // namespace fastmnmf
