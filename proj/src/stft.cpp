#include "fastmnmf/stft.hpp"

#include <cmath>

namespace fastmnmf {

namespace detail {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(size_t n) { return n && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<cplx>& a, bool inverse) {
  const size_t n = a.size();
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

void dft_naive(std::vector<cplx>& a, bool inverse) {
  const size_t n = a.size();
  std::vector<cplx> out(n, cplx(0.0, 0.0));
  const double sign = inverse ? 1.0 : -1.0;
  for (size_t k = 0; k < n; ++k) {
    for (size_t t = 0; t < n; ++t) {
      const double ang = sign * kTwoPi * static_cast<double>(k * t % n) / static_cast<double>(n);
      out[k] += a[t] * cplx(std::cos(ang), std::sin(ang));
    }
  }
  a = std::move(out);
}
}  // namespace

void fft(std::vector<cplx>& a, bool inverse) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size()))
    fft_radix2(a, inverse);
  else
    dft_naive(a, inverse);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(a.size());
    for (auto& v : a) v *= scale;
  }
}

}  // namespace detail

Eigen::VectorXd hann_window(int len) {
  Eigen::VectorXd w(len);
  for (int t = 0; t < len; ++t)
    w(t) = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(t) / static_cast<double>(len));
  return w;
}

ObsTensor stft_forward(const Eigen::MatrixXd& signal, const StftConfig& cfg) {
  if (cfg.window_len < 1 || cfg.hop_len < 1 || cfg.hop_len > cfg.window_len)
    throw std::invalid_argument("stft_forward: need window_len >= hop_len >= 1");
  const int len = static_cast<int>(signal.rows());
  const int channels = static_cast<int>(signal.cols());
  if (!signal.allFinite()) throw std::invalid_argument("stft_forward: non-finite samples");
  if (len < cfg.window_len) throw SignalTooShort("stft_forward: signal shorter than one window");

  const int num_bins = stft_num_bins(cfg);
  const int num_frames = stft_num_frames(cfg, len);
  const Eigen::VectorXd window = hann_window(cfg.window_len);

  ObsTensor out(num_bins, num_frames, channels);
  std::vector<cplx> buf(cfg.window_len);
  for (int m = 0; m < channels; ++m) {
    for (int j = 0; j < num_frames; ++j) {
      const int start = j * cfg.hop_len;
      for (int t = 0; t < cfg.window_len; ++t)
        buf[t] = cplx(signal(start + t, m) * window(t), 0.0);
      detail::fft(buf, false);
      for (int i = 0; i < num_bins; ++i) out.bins[i](m, j) = buf[i];
    }
  }
  return out;
}

Eigen::MatrixXd stft_inverse(const ObsTensor& x, const StftConfig& cfg, int out_len) {
  const int num_bins = stft_num_bins(cfg);
  if (x.num_bins() != num_bins)
    throw ShapeMismatch("stft_inverse: bin count does not match the config");
  const int num_frames = x.num_frames();
  const int channels = x.num_channels();
  const Eigen::VectorXd window = hann_window(cfg.window_len);

  const int covered = num_frames > 0 ? (num_frames - 1) * cfg.hop_len + cfg.window_len : 0;
  const int acc_len = std::max(covered, out_len);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(acc_len, channels);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(acc_len);

  std::vector<cplx> buf(cfg.window_len);
  for (int m = 0; m < channels; ++m) {
    for (int j = 0; j < num_frames; ++j) {
      // restore conjugate symmetry of the one-sided spectrum
      for (int i = 0; i < num_bins; ++i) buf[i] = x.bins[i](m, j);
      for (int i = num_bins; i < cfg.window_len; ++i)
        buf[i] = std::conj(buf[cfg.window_len - i]);
      detail::fft(buf, true);
      const int start = j * cfg.hop_len;
      for (int t = 0; t < cfg.window_len; ++t) {
        acc(start + t, m) += buf[t].real() * window(t);
        if (m == 0) den(start + t) += window(t) * window(t);
      }
    }
  }

  // Exact division on the fully-overlapped interior. Near the edges the
  // window-square sum decays to zero; an inconsistent (modified) spectrum does
  // not decay with it, so an unfloored division would amplify edge samples by
  // 1/w. Flooring at half the full overlap keeps the gain bounded.
  const double den_floor = std::max(1e-12, 0.5 * den.maxCoeff());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(out_len, channels);
  const int n = std::min(out_len, covered);
  for (int t = 0; t < n; ++t) {
    if (den(t) > 1e-12)
      out.row(t) = acc.row(t) / std::max(den(t), den_floor);
  }
  return out;
}

}  // namespace fastmnmf
