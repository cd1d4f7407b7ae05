#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fastmnmf/fastmnmf.hpp"
#include "testutil.hpp"

using namespace fastmnmf;
using testutil::Instance;
using testutil::Rng;

namespace {

// Reference implementations with explicit loops, kept independent of the
// gemm-based estimator code paths.

std::vector<Eigen::MatrixXcd> naive_decorrelate(const ObsTensor& x,
                                                const std::vector<Eigen::MatrixXcd>& w) {
  std::vector<Eigen::MatrixXcd> y(x.num_bins(),
                                  Eigen::MatrixXcd::Zero(x.num_channels(), x.num_frames()));
  for (int i = 0; i < x.num_bins(); ++i)
    for (int j = 0; j < x.num_frames(); ++j)
      for (int m = 0; m < x.num_channels(); ++m)
        for (int a = 0; a < x.num_channels(); ++a)
          y[i](m, j) += std::conj(w[i](a, m)) * x.bins[i](a, j);
  return y;
}

double naive_eta(const NmfModel& model, const std::vector<Eigen::MatrixXd>& lambda, int i, int j,
                 int m) {
  double acc = 0;
  for (int n = 0; n < model.num_sources(); ++n) {
    double h = 0;
    for (int k = 0; k < model.K; ++k) h += model.T[n](i, k) * model.V[n](k, j);
    acc += h * lambda[i](n, m);
  }
  return acc;
}

double naive_cost(const ObsTensor& x, const NmfModel& model, const SpatialModel& spatial,
                  double floor = kFloor) {
  const auto y = naive_decorrelate(x, spatial.W);
  double acc = 0;
  for (int i = 0; i < x.num_bins(); ++i)
    for (int j = 0; j < x.num_frames(); ++j)
      for (int m = 0; m < x.num_channels(); ++m) {
        const double eta = naive_eta(model, spatial.Lambda, i, j, m);
        acc += std::norm(y[i](m, j)) / std::max(eta, floor);
        acc += std::log(std::max(eta, 1e-300));
      }
  for (int i = 0; i < x.num_bins(); ++i)
    acc -= x.num_frames() * std::log(std::norm(spatial.W[i].determinant()));
  return acc;
}

Instance scalar_instance(double x_value) {
  Instance inst;
  inst.x = ObsTensor(1, 1, 1);
  inst.x.bins[0](0, 0) = x_value;
  inst.nmf.K = 1;
  inst.nmf.T = {Eigen::MatrixXd::Ones(1, 1)};
  inst.nmf.V = {Eigen::MatrixXd::Ones(1, 1)};
  inst.lambda = {Eigen::MatrixXd::Ones(1, 1)};
  inst.w = {Eigen::MatrixXcd::Identity(1, 1)};
  return inst;
}

}  // namespace

TEST_CASE("decorrelate: identity, scaling, and the naive oracle") {
  Rng rng(1);
  const ObsTensor x = testutil::random_tensor(3, 5, 3, rng);
  std::vector<Eigen::MatrixXcd> eye(3, Eigen::MatrixXcd::Identity(3, 3));
  auto y = decorrelate(x, eye);
  for (int i = 0; i < 3; ++i) CHECK((y[i] - x.bins[i]).norm() == 0.0);

  std::vector<Eigen::MatrixXcd> twice(3, 2.0 * Eigen::MatrixXcd::Identity(3, 3));
  y = decorrelate(x, twice);
  for (int i = 0; i < 3; ++i) CHECK((y[i] - 2.0 * x.bins[i]).norm() < 1e-14);

  std::vector<Eigen::MatrixXcd> w;
  for (int i = 0; i < 3; ++i) w.push_back(testutil::random_complex(3, 3, rng));
  y = decorrelate(x, w);
  const auto oracle = naive_decorrelate(x, w);
  for (int i = 0; i < 3; ++i) CHECK((y[i] - oracle[i]).norm() <= 1e-12 * oracle[i].norm());
}

TEST_CASE("compute_eta: scalar cases and the floor") {
  Instance inst = scalar_instance(1.0);
  auto eta = compute_eta(inst.nmf, inst.lambda);
  CHECK(eta[0](0, 0) == 1.0);

  inst.nmf.T[0](0, 0) = 2.0;
  inst.nmf.V[0](0, 0) = 3.0;
  inst.lambda[0](0, 0) = 0.5;
  eta = compute_eta(inst.nmf, inst.lambda);
  CHECK(eta[0](0, 0) == doctest::Approx(3.0));

  inst.nmf.T[0](0, 0) = 0.0;
  eta = compute_eta(inst.nmf, inst.lambda);
  CHECK(eta[0](0, 0) == kFloor);
}

TEST_CASE("compute_eta matches the naive contraction") {
  const Instance inst = testutil::random_instance(3, 6, 3, 2, 2, 99);
  const auto eta = compute_eta(inst.nmf, inst.lambda);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j)
      for (int m = 0; m < 3; ++m)
        CHECK(eta[i](j, m) ==
              doctest::Approx(std::max(naive_eta(inst.nmf, inst.lambda, i, j, m), kFloor))
                  .epsilon(1e-12));
}

TEST_CASE("cost_full: scalar value, zero-power case, naive oracle") {
  const Instance inst = scalar_instance(1.0);
  const SpatialModel spatial{inst.w, inst.lambda};
  CHECK(cost_full(inst.x, inst.nmf, spatial) == doctest::Approx(1.0));

  // zero observations with unit eta: only the determinant term remains
  Instance z = testutil::random_instance(2, 4, 2, 1, 1, 5);
  for (auto& b : z.x.bins) b.setZero();
  for (auto& t : z.nmf.T) t.setOnes();
  for (auto& v : z.nmf.V) v.setOnes();
  for (auto& l : z.lambda) l.setOnes();
  const SpatialModel zs{z.w, z.lambda};
  double det_term = 0;
  for (int i = 0; i < 2; ++i) det_term -= 4 * std::log(std::norm(z.w[i].determinant()));
  CHECK(cost_full(z.x, z.nmf, zs) == doctest::Approx(det_term).epsilon(1e-10));

  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Instance r = testutil::random_instance(3, 7, 3, 2, 2, seed);
    const SpatialModel rs{r.w, r.lambda};
    const double fast = cost_full(r.x, r.nmf, rs);
    const double slow = naive_cost(r.x, r.nmf, rs);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-10));
  }
}

TEST_CASE("cost_full reacts to demixer scaling as a re-evaluation predicts") {
  const Instance r = testutil::random_instance(2, 5, 3, 2, 2, 17);
  SpatialModel spatial{r.w, r.lambda};
  const double before = cost_full(r.x, r.nmf, spatial);
  for (auto& w : spatial.W) w *= 2.0;
  const double after = cost_full(r.x, r.nmf, spatial);
  CHECK(after == doctest::Approx(naive_cost(r.x, r.nmf, spatial)).epsilon(1e-10));
  CHECK(after != doctest::Approx(before));
}

TEST_CASE("cost_full throws on a singular demixer") {
  Instance r = testutil::random_instance(2, 4, 2, 1, 1, 3);
  r.w[1].col(0).setZero();
  r.w[1].col(1).setZero();
  const SpatialModel spatial{r.w, r.lambda};
  CHECK_THROWS_AS(cost_full(r.x, r.nmf, spatial), SingularDemixer);
}

TEST_CASE("ip_update_w: scalar closed form and white fixed point") {
  // M=1, eta=1: post-normalization |w|^2 = 1 / mean_j |x_j|^2
  Rng rng(6);
  ObsTensor x(2, 8, 1);
  for (auto& b : x.bins) b = testutil::random_complex(1, 8, rng);
  std::vector<Eigen::MatrixXd> eta(2, Eigen::MatrixXd::Ones(8, 1));
  std::vector<Eigen::MatrixXcd> w(2, Eigen::MatrixXcd::Identity(1, 1));
  ip_update_w(x, eta, w, 0);
  for (int i = 0; i < 2; ++i) {
    const double q = x.bins[i].squaredNorm() / 8.0;
    CHECK(std::norm(w[i](0, 0)) == doctest::Approx(1.0 / q).epsilon(1e-10));
  }

  // spatially white observations with Q = I keep W = I fixed
  const int m_chan = 3;
  ObsTensor white(1, m_chan, m_chan);
  white.bins[0] = std::sqrt(static_cast<double>(m_chan)) *
                  Eigen::MatrixXcd::Identity(m_chan, m_chan);
  std::vector<Eigen::MatrixXd> eta1(1, Eigen::MatrixXd::Ones(m_chan, m_chan));
  std::vector<Eigen::MatrixXcd> weye(1, Eigen::MatrixXcd::Identity(m_chan, m_chan));
  for (int m = 0; m < m_chan; ++m) ip_update_w(white, eta1, weye, m);
  CHECK((weye[0] - Eigen::MatrixXcd::Identity(m_chan, m_chan)).norm() < 1e-12);
}

TEST_CASE("ip normalization holds after the update") {
  const Instance r = testutil::random_instance(3, 16, 3, 2, 2, 11);
  auto eta = compute_eta(r.nmf, r.lambda);
  auto w = r.w;
  for (int m = 0; m < 3; ++m) ip_update_w(r.x, eta, w, m);
  for (int i = 0; i < 3; ++i) {
    for (int m = 0; m < 3; ++m) {
      Eigen::MatrixXcd q = Eigen::MatrixXcd::Zero(3, 3);
      for (int j = 0; j < 16; ++j)
        q += r.x.bins[i].col(j) * r.x.bins[i].col(j).adjoint() / std::max(eta[i](j, m), kFloor);
      q /= 16.0;
      const cplx quad = w[i].col(m).dot(q * w[i].col(m));
      CHECK(std::abs(quad.real() - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("mm updates: scalar reductions of the multiplicative rules") {
  // t: x = 2 so |y|^2 = 4 and eta = 1 -> t <- sqrt(4) = 2
  {
    Instance inst = scalar_instance(2.0);
    auto eta = compute_eta(inst.nmf, inst.lambda);
    const auto pow_y = power_of(decorrelate(inst.x, inst.w));
    mm_update_t(inst.nmf, inst.lambda, pow_y, eta);
    CHECK(inst.nmf.T[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(eta[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));  // refreshed
  }
  // v: |y|^2 = 9 -> v <- 3
  {
    Instance inst = scalar_instance(3.0);
    auto eta = compute_eta(inst.nmf, inst.lambda);
    const auto pow_y = power_of(decorrelate(inst.x, inst.w));
    mm_update_v(inst.nmf, inst.lambda, pow_y, eta);
    CHECK(inst.nmf.V[0](0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  }
  // Lambda: |y|^2 = 16 -> Lambda <- 4
  {
    Instance inst = scalar_instance(4.0);
    auto eta = compute_eta(inst.nmf, inst.lambda);
    const auto pow_y = power_of(decorrelate(inst.x, inst.w));
    mm_update_lambda(inst.nmf, inst.lambda, pow_y, eta);
    CHECK(inst.lambda[0](0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("mm updates match naive loop implementations") {
  const int I = 3, J = 5, M = 3, N = 2, K = 2;
  const Instance base = testutil::random_instance(I, J, M, N, K, 23);
  const auto pow_y = power_of(decorrelate(base.x, base.w));

  auto eta_of = [&](const NmfModel& model, const std::vector<Eigen::MatrixXd>& lambda, int i,
                    int j, int m) { return std::max(naive_eta(model, lambda, i, j, m), kFloor); };

  // naive loop form of the t update
  {
    Instance inst = base;
    auto eta = compute_eta(inst.nmf, inst.lambda);
    NmfModel expect = inst.nmf;
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < I; ++i)
        for (int k = 0; k < K; ++k) {
          double num = 0, den = 0;
          for (int j = 0; j < J; ++j)
            for (int m = 0; m < M; ++m) {
              const double e = eta_of(inst.nmf, inst.lambda, i, j, m);
              num += inst.nmf.V[n](k, j) * inst.lambda[i](n, m) * pow_y[i](j, m) / (e * e);
              den += inst.nmf.V[n](k, j) * inst.lambda[i](n, m) / e;
            }
          expect.T[n](i, k) = std::max(
              inst.nmf.T[n](i, k) * std::sqrt(num / std::max(den, kFloor)), kFloor);
        }
    mm_update_t(inst.nmf, inst.lambda, pow_y, eta);
    for (int n = 0; n < N; ++n)
      CHECK((inst.nmf.T[n] - expect.T[n]).norm() <= 1e-11 * expect.T[n].norm());
  }

  // naive loop form of the Lambda update
  {
    Instance inst = base;
    auto eta = compute_eta(inst.nmf, inst.lambda);
    auto expect = inst.lambda;
    for (int i = 0; i < I; ++i)
      for (int n = 0; n < N; ++n)
        for (int m = 0; m < M; ++m) {
          double num = 0, den = 0;
          for (int j = 0; j < J; ++j) {
            double h = 0;
            for (int k = 0; k < K; ++k) h += inst.nmf.T[n](i, k) * inst.nmf.V[n](k, j);
            const double e = eta_of(inst.nmf, inst.lambda, i, j, m);
            num += h * pow_y[i](j, m) / (e * e);
            den += h / e;
          }
          expect[i](n, m) = std::max(
              inst.lambda[i](n, m) * std::sqrt(num / std::max(den, kFloor)), kFloor);
        }
    mm_update_lambda(inst.nmf, inst.lambda, pow_y, eta);
    for (int i = 0; i < I; ++i)
      CHECK((inst.lambda[i] - expect[i]).norm() <= 1e-11 * expect[i].norm());
  }
}

TEST_CASE("mm updates leave an exact fit unchanged") {
  // choose x with |y|^2 = eta by using W = I and x = sqrt(eta)
  Instance inst = testutil::random_instance(2, 5, 3, 2, 2, 31);
  for (auto& w : inst.w) w = Eigen::MatrixXcd::Identity(3, 3);
  auto eta = compute_eta(inst.nmf, inst.lambda);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 5; ++j)
      for (int m = 0; m < 3; ++m) inst.x.bins[i](m, j) = std::sqrt(eta[i](j, m));
  const auto pow_y = power_of(decorrelate(inst.x, inst.w));

  NmfModel before = inst.nmf;
  auto lambda_before = inst.lambda;
  mm_update_t(inst.nmf, inst.lambda, pow_y, eta);
  mm_update_v(inst.nmf, inst.lambda, pow_y, eta);
  mm_update_lambda(inst.nmf, inst.lambda, pow_y, eta);
  for (int n = 0; n < 2; ++n) {
    CHECK((inst.nmf.T[n] - before.T[n]).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((inst.nmf.V[n] - before.V[n]).cwiseAbs().maxCoeff() <= 1e-12);
  }
  for (int i = 0; i < 2; ++i)
    CHECK((inst.lambda[i] - lambda_before[i]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("scale ambiguity: Lambda * c with t / c keeps eta invariant") {
  Instance inst = testutil::random_instance(2, 4, 3, 2, 2, 41);
  const auto eta0 = compute_eta(inst.nmf, inst.lambda, 0.0);
  const double c = 3.7;
  for (auto& lam : inst.lambda) lam.row(0) *= c;  // scale source 0 only
  inst.nmf.T[0] /= c;
  const auto eta1 = compute_eta(inst.nmf, inst.lambda, 0.0);
  for (int i = 0; i < 2; ++i) CHECK((eta0[i] - eta1[i]).norm() <= 1e-12 * eta0[i].norm());
}

TEST_CASE("every individual update is non-increasing in cost") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng dims_rng(seed + 100);
    const int I = 2 + static_cast<int>(dims_rng.next_below(3));
    const int J = 8 + static_cast<int>(dims_rng.next_below(8));
    const int M = 2 + static_cast<int>(dims_rng.next_below(3));
    const int N = 1 + static_cast<int>(dims_rng.next_below(3));
    const int K = 1 + static_cast<int>(dims_rng.next_below(3));
    Instance inst = testutil::random_instance(I, J, M, N, K, seed);
    SpatialModel spatial{inst.w, inst.lambda};
    auto eta = compute_eta(inst.nmf, spatial.Lambda);
    double cost = cost_full(inst.x, inst.nmf, spatial);

    auto expect_non_increasing = [&](const char* what) {
      const double next = cost_full(inst.x, inst.nmf, spatial);
      INFO(what << " seed " << seed);
      CHECK(next <= cost + 1e-9 * std::abs(cost));
      cost = next;
    };

    for (int sweep = 0; sweep < 3; ++sweep) {
      for (int m = 0; m < M; ++m) {
        ip_update_w(inst.x, eta, spatial.W, m);
        expect_non_increasing("ip");
      }
      const auto pow_y = power_of(decorrelate(inst.x, spatial.W));
      mm_update_t(inst.nmf, spatial.Lambda, pow_y, eta);
      expect_non_increasing("t");
      mm_update_v(inst.nmf, spatial.Lambda, pow_y, eta);
      expect_non_increasing("v");
      mm_update_lambda(inst.nmf, spatial.Lambda, pow_y, eta);
      expect_non_increasing("lambda");
    }
  }
}

TEST_CASE("fit_full: zero iterations, determinism, monotone trace") {
  const Instance inst = testutil::random_instance(4, 12, 3, 2, 2, 55);
  InitBundle init;
  init.layout = BlockLayout::full(3);
  init.nmf = inst.nmf;
  init.w0 = {inst.w};
  init.lambda0 = inst.lambda;

  const FullFit f0 = fit_full(inst.x, init, 0);
  CHECK(f0.report.cost_trace.size() == 1);
  const SpatialModel s0{init.w0[0], init.lambda0};
  CHECK(f0.report.cost_trace[0] == doctest::Approx(cost_full(inst.x, init.nmf, s0)));

  const FullFit a = fit_full(inst.x, init, 30);
  const FullFit b = fit_full(inst.x, init, 30);
  CHECK(a.report.cost_trace == b.report.cost_trace);  // bitwise determinism
  for (size_t it = 1; it < a.report.cost_trace.size(); ++it)
    CHECK(a.report.cost_trace[it] <=
          a.report.cost_trace[it - 1] + 1e-9 * std::abs(a.report.cost_trace[it - 1]));
  CHECK(a.report.wall_seconds.size() == 30);

  // the recorded trace matches an independent cost evaluation of the result
  const double final_cost = cost_full(inst.x, a.nmf, a.spatial);
  CHECK(final_cost == doctest::Approx(a.report.cost_trace.back()).epsilon(1e-12));
}

TEST_CASE("fit_full stays finite on adversarial inputs") {
  // silent channel plus a duplicated channel
  Instance inst = testutil::random_instance(3, 10, 4, 2, 2, 77);
  for (auto& b : inst.x.bins) {
    b.row(1).setZero();
    b.row(3) = b.row(2);
  }
  InitBundle init;
  init.layout = BlockLayout::full(4);
  init.nmf = inst.nmf;
  init.w0 = {inst.w};
  init.lambda0 = inst.lambda;
  const FullFit fit = fit_full(inst.x, init, 60);
  for (int n = 0; n < 2; ++n) {
    CHECK(fit.nmf.T[n].allFinite());
    CHECK(fit.nmf.V[n].allFinite());
    CHECK(fit.nmf.T[n].minCoeff() >= kFloor);
    CHECK(fit.nmf.V[n].minCoeff() >= kFloor);
  }
  for (const auto& lam : fit.spatial.Lambda) {
    CHECK(lam.allFinite());
    CHECK(lam.minCoeff() >= kFloor);
  }
  for (const auto& w : fit.spatial.W) CHECK(w.allFinite());
  // rank-deficient data confines the demixer to a subspace, so the log-det may
  // diverge; the parameters themselves must never go non-finite
  for (double c : fit.report.cost_trace) CHECK_FALSE(std::isnan(c));
}
