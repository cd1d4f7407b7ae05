#include "fastmnmf/dist.hpp"

#include "engine.hpp"

namespace fastmnmf {

namespace {

std::vector<Eigen::MatrixXcd> block_decorrelate(const ObsTensor& x,
                                                const BlockSpatialModel& spatial) {
  std::vector<Eigen::MatrixXcd> y(x.num_bins(),
                                  Eigen::MatrixXcd(x.num_channels(), x.num_frames()));
  for (int l = 0; l < spatial.layout.num_blocks(); ++l)
    detail::decorrelate_block_into(x, spatial.layout, l, spatial.W[l], y, nullptr);
  return y;
}

}  // namespace

double cost_dist(const ObsTensor& x, const NmfModel& model, const BlockSpatialModel& spatial,
                 double floor) {
  if (spatial.layout.total != x.num_channels())
    throw ShapeMismatch("cost_dist: layout/channel mismatch");
  const auto p = power_of(block_decorrelate(x, spatial));
  const auto h = detail::spectrogram(model);
  double det = 0.0;
  for (const auto& wl : spatial.W) det += detail::logdet_term(wl);
  if (!std::isfinite(det)) throw SingularDemixer("cost_dist: singular demixing matrix");
  return detail::power_term(p, h, spatial.Lambda, floor) -
         static_cast<double>(x.num_frames()) * det;
}

double cost_dist(const ObsTensor& x, const std::vector<NmfModel>& models,
                 const BlockSpatialModel& spatial, double floor) {
  if (models.size() == 1) return cost_dist(x, models[0], spatial, floor);
  if (static_cast<int>(models.size()) != spatial.layout.num_blocks())
    throw ShapeMismatch("cost_dist: one model per subarray expected");
  double acc = 0.0;
  for (int l = 0; l < spatial.layout.num_blocks(); ++l)
    acc += cost_full(extract_block(x, spatial.layout, l), models[l], spatial.block_model(l),
                     floor);
  return acc;
}

void ip_update_block(const ObsTensor& x, const std::vector<Eigen::MatrixXd>& eta,
                     const BlockLayout& layout, int block,
                     std::vector<Eigen::MatrixXcd>& w_block, int mu, double floor) {
  detail::ip_sweep_column(x, eta, layout, block, w_block, mu, floor);
}

DistFit fit_distributed(const ObsTensor& x, const BlockLayout& layout, const InitBundle& init,
                        int iters, bool share_spectrograms, const FitOptions& options) {
  if (layout.total != x.num_channels())
    throw ShapeMismatch("fit_distributed: layout/channel mismatch");

  DistFit out;
  out.shared = share_spectrograms;
  out.spatial.layout = layout;

  if (share_spectrograms) {
    detail::EngineResult r = detail::run_engine(x, layout, init, iters, options);
    out.models.push_back(std::move(r.nmf));
    out.spatial.W = std::move(r.w_blocks);
    out.spatial.Lambda = std::move(r.lambda);
    out.report = std::move(r.report);
    return out;
  }

  // Independent spectrograms: each subarray runs the single-array estimator on
  // its own channels, starting from the same sliced init, with no exchange.
  const int n_blocks = layout.num_blocks();
  out.spatial.W.resize(n_blocks);
  out.spatial.Lambda.assign(x.num_bins(),
                            Eigen::MatrixXd::Zero(init.nmf.num_sources(), layout.total));
  out.report.iterations = iters;
  out.report.cost_trace.assign(iters + 1, 0.0);
  out.report.wall_seconds.assign(iters, 0.0);

  for (int l = 0; l < n_blocks; ++l) {
    const ObsTensor xl = extract_block(x, layout, l);
    const InitBundle sub_init = slice_init(init, l);
    FullFit fit = fit_single(xl, sub_init, iters, options);
    out.models.push_back(std::move(fit.nmf));
    out.spatial.W[l] = std::move(fit.spatial.W);
    for (int i = 0; i < x.num_bins(); ++i)
      out.spatial.Lambda[i].middleCols(layout.offsets[l], layout.sizes[l]) =
          fit.spatial.Lambda[i];
    for (int it = 0; it <= iters; ++it) out.report.cost_trace[it] += fit.report.cost_trace[it];
    for (int it = 0; it < iters; ++it) out.report.wall_seconds[it] += fit.report.wall_seconds[it];
    out.report.stages += fit.report.stages;
    out.report.ops += fit.report.ops;
  }
  return out;
}

}  // namespace fastmnmf
