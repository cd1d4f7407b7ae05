// Hann-window STFT with weighted overlap-add inverse.
#pragma once

#include "fastmnmf/types.hpp"

namespace fastmnmf {

struct StftConfig {
  double sample_rate = 16000.0;
  int window_len = 4096;  // 256 ms at 16 kHz
  int hop_len = 1024;     // 64 ms at 16 kHz

  static StftConfig from_ms(double sample_rate, double window_ms, double hop_ms) {
    StftConfig cfg;
    cfg.sample_rate = sample_rate;
    cfg.window_len = static_cast<int>(std::lround(window_ms * 1e-3 * sample_rate));
    cfg.hop_len = static_cast<int>(std::lround(hop_ms * 1e-3 * sample_rate));
    return cfg;
  }
};

inline int stft_num_bins(const StftConfig& cfg) { return cfg.window_len / 2 + 1; }

inline int stft_num_frames(const StftConfig& cfg, int signal_len) {
  if (signal_len < cfg.window_len) return 0;
  return (signal_len - cfg.window_len) / cfg.hop_len + 1;
}

// periodic Hann, zero at the first sample
Eigen::VectorXd hann_window(int len);

/// One-sided spectrum per frame; frame j covers samples [j*hop, j*hop + window_len).
/// signal is samples x channels. Throws SignalTooShort when no full frame fits.
ObsTensor stft_forward(const Eigen::MatrixXd& signal, const StftConfig& cfg);

/// Weighted overlap-add inverse; reconstructs the forward transform's input on
/// the fully-overlapped interior to roundoff. Output is out_len x channels.
Eigen::MatrixXd stft_inverse(const ObsTensor& x, const StftConfig& cfg, int out_len);

namespace detail {
// In-place complex FFT: radix-2 for power-of-two sizes, plain DFT otherwise.
void fft(std::vector<cplx>& a, bool inverse);
}  // namespace detail

}  // namespace fastmnmf
