#include "fastmnmf/fastmnmf.hpp"

#include "engine.hpp"
#include "fastmnmf/hermlin.hpp"

namespace fastmnmf {

NmfModel NmfModel::random(int num_bins, int num_frames, int num_sources, int k, Rng& rng,
                          double floor) {
  NmfModel m;
  m.K = k;
  m.T.reserve(num_sources);
  m.V.reserve(num_sources);
  for (int n = 0; n < num_sources; ++n) {
    Eigen::MatrixXd t(num_bins, k), v(k, num_frames);
    for (int i = 0; i < num_bins; ++i)
      for (int c = 0; c < k; ++c) t(i, c) = floor + rng.uniform();
    for (int c = 0; c < k; ++c)
      for (int j = 0; j < num_frames; ++j) v(c, j) = floor + rng.uniform();
    m.T.push_back(std::move(t));
    m.V.push_back(std::move(v));
  }
  return m;
}

Eigen::MatrixXcd BlockSpatialModel::assembled_w(int bin) const {
  std::vector<Eigen::MatrixXcd> blocks;
  blocks.reserve(W.size());
  for (const auto& wl : W) blocks.push_back(wl.at(bin));
  return blkdiag(blocks);
}

SpatialModel BlockSpatialModel::block_model(int block) const {
  SpatialModel out;
  out.W = W.at(block);
  const int off = layout.offsets.at(block);
  const int mb = layout.sizes.at(block);
  out.Lambda.reserve(Lambda.size());
  for (const auto& lam : Lambda) out.Lambda.push_back(lam.middleCols(off, mb));
  return out;
}

std::vector<Eigen::MatrixXcd> decorrelate(const ObsTensor& x,
                                          const std::vector<Eigen::MatrixXcd>& w) {
  if (static_cast<int>(w.size()) != x.num_bins())
    throw ShapeMismatch("decorrelate: bin count mismatch");
  if (!w.empty() && (w[0].rows() != x.num_channels() || w[0].cols() != x.num_channels()))
    throw ShapeMismatch("decorrelate: demixer size mismatch");
  std::vector<Eigen::MatrixXcd> y(x.num_bins(),
                                  Eigen::MatrixXcd(x.num_channels(), x.num_frames()));
  const BlockLayout layout = BlockLayout::full(x.num_channels());
  detail::decorrelate_block_into(x, layout, 0, w, y, nullptr);
  return y;
}

std::vector<Eigen::MatrixXd> power_of(const std::vector<Eigen::MatrixXcd>& y) {
  std::vector<Eigen::MatrixXd> p;
  p.reserve(y.size());
  for (const auto& yi : y) p.push_back(yi.cwiseAbs2().transpose());
  return p;
}

std::vector<Eigen::MatrixXd> build_spectrogram(const NmfModel& model) {
  return detail::spectrogram(model);
}

std::vector<Eigen::MatrixXd> compute_eta(const NmfModel& model,
                                         const std::vector<Eigen::MatrixXd>& lambda,
                                         double floor) {
  std::vector<Eigen::MatrixXd> eta;
  detail::eta_from(detail::spectrogram(model), lambda, eta, floor);
  return eta;
}

double cost_full(const ObsTensor& x, const NmfModel& model, const SpatialModel& spatial,
                 double floor) {
  const auto y = decorrelate(x, spatial.W);
  const auto p = power_of(y);
  const auto h = detail::spectrogram(model);
  const double det = detail::logdet_term(spatial.W);
  if (!std::isfinite(det)) throw SingularDemixer("cost_full: singular demixing matrix");
  return detail::power_term(p, h, spatial.Lambda, floor) -
         static_cast<double>(x.num_frames()) * det;
}

void ip_update_w(const ObsTensor& x, const std::vector<Eigen::MatrixXd>& eta,
                 std::vector<Eigen::MatrixXcd>& w, int m, double floor) {
  const BlockLayout layout = BlockLayout::full(x.num_channels());
  detail::ip_sweep_column(x, eta, layout, 0, w, m, floor);
}

void mm_update_t(NmfModel& model, const std::vector<Eigen::MatrixXd>& lambda,
                 const std::vector<Eigen::MatrixXd>& pow_y, std::vector<Eigen::MatrixXd>& eta,
                 double floor) {
  detail::RMats a, b;
  detail::build_tv_weights(lambda, pow_y, eta, a, b);
  detail::update_t(model, a, b, floor);
  detail::eta_from(detail::spectrogram(model), lambda, eta, floor);
}

void mm_update_v(NmfModel& model, const std::vector<Eigen::MatrixXd>& lambda,
                 const std::vector<Eigen::MatrixXd>& pow_y, std::vector<Eigen::MatrixXd>& eta,
                 double floor) {
  detail::RMats a, b;
  detail::build_tv_weights(lambda, pow_y, eta, a, b);
  detail::update_v(model, a, b, floor);
  detail::eta_from(detail::spectrogram(model), lambda, eta, floor);
}

void mm_update_lambda(const NmfModel& model, std::vector<Eigen::MatrixXd>& lambda,
                      const std::vector<Eigen::MatrixXd>& pow_y,
                      std::vector<Eigen::MatrixXd>& eta, double floor) {
  const auto h = detail::spectrogram(model);
  detail::update_lambda(lambda, h, pow_y, eta, floor);
  detail::eta_from(h, lambda, eta, floor);
}

FullFit fit_full(const ObsTensor& x, const InitBundle& init, int iters,
                 const FitOptions& options) {
  const BlockLayout layout = BlockLayout::full(x.num_channels());
  detail::EngineResult r = detail::run_engine(x, layout, init, iters, options);
  FullFit out;
  out.nmf = std::move(r.nmf);
  out.spatial.W = std::move(r.w_blocks[0]);
  out.spatial.Lambda = std::move(r.lambda);
  out.report = std::move(r.report);
  return out;
}

FullFit fit_single(const ObsTensor& x_subarray, const InitBundle& init, int iters,
                   const FitOptions& options) {
  return fit_full(x_subarray, init, iters, options);
}

}  // namespace fastmnmf
