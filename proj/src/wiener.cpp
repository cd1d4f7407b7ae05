#include "fastmnmf/wiener.hpp"

#include "engine.hpp"

namespace fastmnmf {

namespace {

// Filters the rows [off, off+mb) of x into every source image using one
// block's demixer and its Lambda columns, with the spectrograms h (J x N).
void wiener_rows(const ObsTensor& x, int off, int mb,
                 const std::vector<Eigen::MatrixXcd>& w_block,
                 const std::vector<Eigen::MatrixXd>& lambda, int lambda_off,
                 const detail::RMats& h, std::vector<ObsTensor>& images, double floor) {
  const int n_src = static_cast<int>(images.size());
  const int j_frames = x.num_frames();
  Eigen::MatrixXcd y(mb, j_frames), scaled(mb, j_frames);
  for (int i = 0; i < x.num_bins(); ++i) {
    const auto xb = x.bins[i].middleRows(off, mb);
    const Eigen::MatrixXcd& w = w_block[i];
    y.noalias() = w.adjoint() * xb;
    const auto lam = lambda[i].middleCols(lambda_off, mb);  // N x mb
    // eta_jm = sum_n h_jn lam(n, m), floored like the estimator
    const Eigen::MatrixXd eta = (h[i] * lam).cwiseMax(floor);  // J x mb
    Eigen::PartialPivLU<Eigen::MatrixXcd> wh_lu(w.adjoint());
    for (int n = 0; n < n_src; ++n) {
      // per-channel Wiener gain in the decorrelated domain
      const Eigen::MatrixXd gain =
          (h[i].col(n) * lam.row(n)).cwiseQuotient(eta);  // J x mb
      scaled = y.cwiseProduct(gain.transpose());
      images[n].bins[i].middleRows(off, mb).noalias() = wh_lu.solve(scaled);
    }
  }
}

}  // namespace

SourceImages wiener_full(const ObsTensor& x, const NmfModel& model, const SpatialModel& spatial,
                         double floor) {
  if (static_cast<int>(spatial.W.size()) != x.num_bins())
    throw ShapeMismatch("wiener_full: bin count mismatch");
  const int n_src = model.num_sources();
  SourceImages out;
  out.images.assign(n_src, ObsTensor(x.num_bins(), x.num_frames(), x.num_channels()));
  const detail::RMats h = detail::spectrogram(model);
  wiener_rows(x, 0, x.num_channels(), spatial.W, spatial.Lambda, 0, h, out.images, floor);
  return out;
}

SourceImages wiener_block(const ObsTensor& x, const std::vector<NmfModel>& models,
                          const BlockSpatialModel& spatial, double floor) {
  if (spatial.layout.total != x.num_channels())
    throw ShapeMismatch("wiener_block: layout/channel mismatch");
  const bool shared = models.size() == 1;
  if (!shared && static_cast<int>(models.size()) != spatial.layout.num_blocks())
    throw ShapeMismatch("wiener_block: one model per subarray expected");

  const int n_src = models[0].num_sources();
  SourceImages out;
  out.images.assign(n_src, ObsTensor(x.num_bins(), x.num_frames(), x.num_channels()));
  detail::RMats h;
  if (shared) h = detail::spectrogram(models[0]);
  for (int l = 0; l < spatial.layout.num_blocks(); ++l) {
    if (!shared) h = detail::spectrogram(models[l]);
    wiener_rows(x, spatial.layout.offsets[l], spatial.layout.sizes[l], spatial.W[l],
                spatial.Lambda, spatial.layout.offsets[l], h, out.images, floor);
  }
  return out;
}

std::vector<Eigen::MatrixXd> reconstruct(const SourceImages& images, const StftConfig& cfg,
                                         int out_len) {
  std::vector<Eigen::MatrixXd> waves;
  waves.reserve(images.images.size());
  for (const auto& img : images.images) waves.push_back(stft_inverse(img, cfg, out_len));
  return waves;
}

}  // namespace fastmnmf
