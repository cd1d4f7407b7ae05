#include "engine.hpp"

#include "fastmnmf/hermlin.hpp"

#include <chrono>

namespace fastmnmf::detail {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double log_abs_det(const Eigen::MatrixXcd& w) {
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(w);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < w.rows(); ++k) {
    const double p = std::abs(lu.matrixLU()(k, k));
    if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
    acc += std::log(p);
  }
  return acc;
}

}  // namespace

void ip_sweep_column(const ObsTensor& x, const RMats& eta, const BlockLayout& layout, int block,
                     CMats& w_block, int mu, double floor, OpCounts* ops) {
  const int num_bins = x.num_bins();
  const int j_frames = x.num_frames();
  const int off = layout.offsets.at(block);
  const int mb = layout.sizes.at(block);
  const int m_global = off + mu;
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(mb);
  e(mu) = 1.0;

  for (int i = 0; i < num_bins; ++i) {
    const auto xb = x.bins[i].middleRows(off, mb);
    // Q = (1/J) sum_j eta^-1 x x^H
    Eigen::VectorXd wgt = eta[i].col(m_global).cwiseMax(floor).cwiseInverse();
    Eigen::MatrixXcd xw = xb * wgt.asDiagonal();
    Eigen::MatrixXcd q = (xw * xb.adjoint()) / static_cast<double>(j_frames);
    // w = (W^H Q)^-1 e, pseudo-inverse when the system is singular
    Eigen::MatrixXcd sys = w_block[i].adjoint() * q;
    Eigen::VectorXcd u = sys.partialPivLu().solve(e);
    if (!u.allFinite() || (sys * u - e).norm() > 1e-6) u = pinv_solve(sys, e);
    // normalize so w^H Q w = 1, floored against degenerate Q
    const double nrm = std::real(u.dot(q * u));
    u /= std::sqrt(std::max(nrm, floor));
    w_block[i].col(mu) = u;
  }
  if (ops)
    ops->w_update += static_cast<double>(num_bins) *
                     (static_cast<double>(j_frames) * mb * mb + static_cast<double>(mb) * mb * mb);
}

void decorrelate_block_into(const ObsTensor& x, const BlockLayout& layout, int block,
                            const CMats& w_block, CMats& y, RMats* pow_y) {
  const int off = layout.offsets.at(block);
  const int mb = layout.sizes.at(block);
  for (int i = 0; i < x.num_bins(); ++i) {
    y[i].middleRows(off, mb).noalias() = w_block[i].adjoint() * x.bins[i].middleRows(off, mb);
    if (pow_y)
      (*pow_y)[i].middleCols(off, mb) = y[i].middleRows(off, mb).cwiseAbs2().transpose();
  }
}

RMats spectrogram(const NmfModel& model) {
  const int num_bins = model.num_bins();
  const int j_frames = model.num_frames();
  const int n_src = model.num_sources();
  RMats h(num_bins, Eigen::MatrixXd(j_frames, n_src));
  for (int n = 0; n < n_src; ++n) {
    const Eigen::MatrixXd hn = model.T[n] * model.V[n];  // I x J
    for (int i = 0; i < num_bins; ++i) h[i].col(n) = hn.row(i).transpose();
  }
  return h;
}

void eta_from(const RMats& h, const RMats& lambda, RMats& eta, double floor) {
  const int num_bins = static_cast<int>(h.size());
  if (eta.size() != h.size()) eta.resize(h.size());
  for (int i = 0; i < num_bins; ++i) eta[i] = (h[i] * lambda[i]).cwiseMax(floor);
}

void build_tv_weights(const RMats& lambda, const RMats& pow_y, const RMats& eta, RMats& a,
                      RMats& b, OpCounts* ops) {
  const int num_bins = static_cast<int>(pow_y.size());
  const int j_frames = static_cast<int>(pow_y[0].rows());
  const int n_src = static_cast<int>(lambda[0].rows());
  const int m_chan = static_cast<int>(lambda[0].cols());
  if (a.size() != static_cast<size_t>(n_src)) {
    a.assign(n_src, Eigen::MatrixXd(num_bins, j_frames));
    b.assign(n_src, Eigen::MatrixXd(num_bins, j_frames));
  }
  Eigen::MatrixXd inv_eta, z, ai, bi;
  for (int i = 0; i < num_bins; ++i) {
    inv_eta = eta[i].cwiseInverse();  // eta is floored, so this is finite
    z = pow_y[i].cwiseProduct(inv_eta).cwiseProduct(inv_eta);
    ai.noalias() = z * lambda[i].transpose();        // J x N
    bi.noalias() = inv_eta * lambda[i].transpose();  // J x N
    for (int n = 0; n < n_src; ++n) {
      a[n].row(i) = ai.col(n).transpose();
      b[n].row(i) = bi.col(n).transpose();
    }
  }
  if (ops)
    ops->mm_update +=
        2.0 * static_cast<double>(num_bins) * j_frames * n_src * m_chan;
}

void update_t(NmfModel& model, const RMats& a, const RMats& b, double floor, OpCounts* ops) {
  for (int n = 0; n < model.num_sources(); ++n) {
    const Eigen::MatrixXd num = a[n] * model.V[n].transpose();  // I x K
    const Eigen::MatrixXd den = b[n] * model.V[n].transpose();
    model.T[n] =
        (model.T[n].array() * (num.array() / den.array().max(floor)).sqrt()).max(floor).matrix();
    if (ops) ops->mm_update += 2.0 * num.rows() * num.cols() * model.V[n].cols();
  }
}

void update_v(NmfModel& model, const RMats& a, const RMats& b, double floor, OpCounts* ops) {
  for (int n = 0; n < model.num_sources(); ++n) {
    const Eigen::MatrixXd num = model.T[n].transpose() * a[n];  // K x J
    const Eigen::MatrixXd den = model.T[n].transpose() * b[n];
    model.V[n] =
        (model.V[n].array() * (num.array() / den.array().max(floor)).sqrt()).max(floor).matrix();
    if (ops) ops->mm_update += 2.0 * num.rows() * num.cols() * model.T[n].rows();
  }
}

void update_lambda(RMats& lambda, const RMats& h, const RMats& pow_y, const RMats& eta,
                   double floor, OpCounts* ops) {
  const int num_bins = static_cast<int>(lambda.size());
  Eigen::MatrixXd inv_eta, z, num, den;
  for (int i = 0; i < num_bins; ++i) {
    inv_eta = eta[i].cwiseInverse();
    z = pow_y[i].cwiseProduct(inv_eta).cwiseProduct(inv_eta);
    num.noalias() = h[i].transpose() * z;        // N x M
    den.noalias() = h[i].transpose() * inv_eta;  // N x M
    lambda[i] =
        (lambda[i].array() * (num.array() / den.array().max(floor)).sqrt()).max(floor).matrix();
    if (ops) ops->mm_update += 2.0 * num.rows() * num.cols() * h[i].rows();
  }
}

double power_term(const RMats& pow_y, const RMats& h, const RMats& lambda, double floor) {
  double acc = 0.0;
  Eigen::MatrixXd raw;
  for (size_t i = 0; i < pow_y.size(); ++i) {
    raw.noalias() = h[i] * lambda[i];
    acc += (pow_y[i].array() / raw.array().max(floor)).sum();
    acc += raw.array().max(1e-300).log().sum();
  }
  return acc;
}

double logdet_term(const CMats& w_block) {
  double acc = 0.0;
  for (const auto& w : w_block) acc += 2.0 * log_abs_det(w);
  return acc;
}

EngineResult run_engine(const ObsTensor& x, const BlockLayout& layout, const InitBundle& init,
                        int iters, const FitOptions& options) {
  const int num_bins = x.num_bins();
  const int j_frames = x.num_frames();
  const int m_chan = x.num_channels();
  const int n_blocks = layout.num_blocks();
  if (layout.total != m_chan) throw ShapeMismatch("run_engine: layout/channel mismatch");
  if (static_cast<int>(init.w0.size()) != n_blocks)
    throw ShapeMismatch("run_engine: init has wrong number of demixer blocks");
  if (init.nmf.num_bins() != num_bins || init.nmf.num_frames() != j_frames)
    throw ShapeMismatch("run_engine: init factor shapes do not match the observations");
  if (iters < 0) throw std::invalid_argument("run_engine: negative iteration count");
  const double floor = options.floor;
  if (!(floor > 0)) throw std::invalid_argument("run_engine: floor must be positive");

  EngineResult state;
  state.nmf = init.nmf;
  state.w_blocks = init.w0;
  state.lambda = init.lambda0;

  // caches
  CMats y(num_bins, Eigen::MatrixXcd(m_chan, j_frames));
  RMats pow_y(num_bins, Eigen::MatrixXd(j_frames, m_chan));
  RMats eta, h, wa, wb;

  FitReport& report = state.report;
  report.iterations = iters;
  report.cost_trace.reserve(iters + 1);
  report.wall_seconds.reserve(iters);

  h = spectrogram(state.nmf);
  eta_from(h, state.lambda, eta, floor);
  for (int l = 0; l < n_blocks; ++l)
    decorrelate_block_into(x, layout, l, state.w_blocks[l], y, &pow_y);

  auto cost_now = [&]() {
    double det = 0.0;
    for (int l = 0; l < n_blocks; ++l) det += logdet_term(state.w_blocks[l]);
    return power_term(pow_y, h, state.lambda, floor) - static_cast<double>(j_frames) * det;
  };
  report.cost_trace.push_back(cost_now());

  for (int it = 0; it < iters; ++it) {
    const auto iter_start = Clock::now();

    // IP sweep: all blocks, columns ascending
    const auto w_start = Clock::now();
    for (int l = 0; l < n_blocks; ++l)
      for (int mu = 0; mu < layout.sizes[l]; ++mu)
        ip_sweep_column(x, eta, layout, l, state.w_blocks[l], mu, floor, &report.ops);
    report.stages.w_update += seconds_since(w_start);

    const auto d_start = Clock::now();
    for (int l = 0; l < n_blocks; ++l)
      decorrelate_block_into(x, layout, l, state.w_blocks[l], y, &pow_y);
    report.stages.decorrelate += seconds_since(d_start);

    // MM sweep: t, v, Lambda, eta refreshed after each
    auto mm_start = Clock::now();
    build_tv_weights(state.lambda, pow_y, eta, wa, wb, &report.ops);
    update_t(state.nmf, wa, wb, floor, &report.ops);
    report.stages.mm_update += seconds_since(mm_start);

    auto eta_start = Clock::now();
    h = spectrogram(state.nmf);
    eta_from(h, state.lambda, eta, floor);
    report.stages.eta += seconds_since(eta_start);

    mm_start = Clock::now();
    build_tv_weights(state.lambda, pow_y, eta, wa, wb, &report.ops);
    update_v(state.nmf, wa, wb, floor, &report.ops);
    report.stages.mm_update += seconds_since(mm_start);

    eta_start = Clock::now();
    h = spectrogram(state.nmf);
    eta_from(h, state.lambda, eta, floor);
    report.stages.eta += seconds_since(eta_start);

    mm_start = Clock::now();
    update_lambda(state.lambda, h, pow_y, eta, floor, &report.ops);
    report.stages.mm_update += seconds_since(mm_start);

    eta_start = Clock::now();
    eta_from(h, state.lambda, eta, floor);
    report.stages.eta += seconds_since(eta_start);

    const double cost = cost_now();
    report.cost_trace.push_back(cost);
    report.wall_seconds.push_back(seconds_since(iter_start));

    if (options.eval_every > 0 && options.on_eval && (it + 1) % options.eval_every == 0) {
      // callback time is excluded: the clock for this iteration already stopped
      FitSnapshot snap;
      snap.iteration = it + 1;
      snap.cost = cost;
      snap.elapsed_seconds = report.total_seconds();
      snap.layout = &layout;
      snap.models = {&state.nmf};
      snap.w_blocks = &state.w_blocks;
      snap.lambda = &state.lambda;
      snap.shared = true;
      options.on_eval(snap);
    }
  }
  return state;
}

}  // namespace fastmnmf::detail
