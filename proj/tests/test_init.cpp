#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fastmnmf/hermlin.hpp"
#include "fastmnmf/init.hpp"
#include "testutil.hpp"

using namespace fastmnmf;
using testutil::Rng;

namespace {

// Two anechoic sources active in disjoint time blocks, observed by two mics
// with distinct steering phases. Returns the tensor and the true activity.
struct TwoSourceScene {
  ObsTensor x;
  std::vector<int> active;  // per frame: 0 or 1
};

TwoSourceScene two_source_scene(int num_bins, int num_frames, std::uint64_t seed) {
  Rng rng(seed);
  TwoSourceScene scene;
  scene.x = ObsTensor(num_bins, num_frames, 2);
  scene.active.resize(num_frames);
  for (int j = 0; j < num_frames; ++j) scene.active[j] = (j / 8) % 2;
  for (int i = 0; i < num_bins; ++i) {
    // two steering directions, kept spatially apart at every bin
    const double theta = 0.3 + 0.11 * i;
    const auto steer = [&](double phase) {
      Eigen::Vector2cd a;
      a << cplx(1.0, 0.0), std::polar(1.0, phase);
      return a;
    };
    const Eigen::Vector2cd a0 = steer(theta), a1 = steer(theta + M_PI);
    for (int j = 0; j < num_frames; ++j) {
      const cplx s(rng.gaussian(), rng.gaussian());
      scene.x.bins[i].col(j) = (scene.active[j] == 0 ? a0 : a1) * s;
    }
  }
  return scene;
}

}  // namespace

TEST_CASE("cluster_masks with one source is all ones") {
  Rng rng(1);
  const ObsTensor x = testutil::random_tensor(3, 10, 2, rng);
  const SoftMask mask = cluster_masks(x, 1, 7);
  for (const auto& bin : mask.bins) CHECK((bin - Eigen::MatrixXd::Ones(10, 1)).norm() == 0.0);
}

TEST_CASE("cluster_masks mask rows sum to one and silent bins fall back to uniform") {
  Rng rng(2);
  ObsTensor x = testutil::random_tensor(4, 12, 3, rng);
  x.bins[2].setZero();  // silent bin
  const SoftMask mask = cluster_masks(x, 3, 11);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 12; ++j)
      CHECK(mask.bins[i].row(j).sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK((mask.bins[2] - Eigen::MatrixXd::Constant(12, 3, 1.0 / 3)).norm() == 0.0);
}

TEST_CASE("cluster_masks separates disjointly active sources") {
  const TwoSourceScene scene = two_source_scene(12, 64, 3);
  const SoftMask mask = cluster_masks(scene.x, 2, 5);
  double purity = 0;
  int count = 0;
  for (int i = 0; i < 12; ++i) {
    // hard-assignment purity; per-bin labels may be swapped, take the better
    int match = 0;
    for (int j = 0; j < 64; ++j) {
      const int label = mask.bins[i](j, 0) >= mask.bins[i](j, 1) ? 0 : 1;
      if (label == scene.active[j]) ++match;
    }
    const double frac = static_cast<double>(match) / 64.0;
    purity += std::max(frac, 1.0 - frac);
    ++count;
  }
  CHECK(purity / count >= 0.9);
}

TEST_CASE("align_frequency_permutations is a fixed point on aligned masks") {
  const TwoSourceScene scene = two_source_scene(10, 48, 9);
  SoftMask mask;
  mask.bins.assign(10, Eigen::MatrixXd(48, 2));
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 48; ++j) {
      mask.bins[i](j, scene.active[j]) = 0.95;
      mask.bins[i](j, 1 - scene.active[j]) = 0.05;
    }
  SoftMask aligned = mask;
  align_frequency_permutations(aligned);
  for (int i = 0; i < 10; ++i) CHECK((aligned.bins[i] - mask.bins[i]).norm() == 0.0);
}

TEST_CASE("align_frequency_permutations recovers planted per-bin swaps") {
  const int num_bins = 40, num_frames = 64;
  const TwoSourceScene scene = two_source_scene(num_bins, num_frames, 13);
  SoftMask mask;
  mask.bins.assign(num_bins, Eigen::MatrixXd(num_frames, 2));
  for (int i = 0; i < num_bins; ++i)
    for (int j = 0; j < num_frames; ++j) {
      mask.bins[i](j, scene.active[j]) = 0.9;
      mask.bins[i](j, 1 - scene.active[j]) = 0.1;
    }
  // plant random swaps
  Rng rng(17);
  SoftMask scrambled = mask;
  for (int i = 0; i < num_bins; ++i)
    if (rng.uniform() < 0.5) scrambled.bins[i] = scrambled.bins[i].rowwise().reverse().eval();
  align_frequency_permutations(scrambled);
  // global labeling may be flipped; count bins agreeing with the majority
  int direct = 0;
  for (int i = 0; i < num_bins; ++i)
    if ((scrambled.bins[i] - mask.bins[i]).norm() < 1e-12) ++direct;
  const double frac = static_cast<double>(std::max(direct, num_bins - direct)) / num_bins;
  CHECK(frac >= 0.95);
}

TEST_CASE("two-bin swap is detected by correlation") {
  SoftMask mask;
  mask.bins.assign(2, Eigen::MatrixXd(6, 2));
  Eigen::VectorXd act(6);
  act << 1, 1, 0, 0, 1, 0;
  for (int j = 0; j < 6; ++j) {
    mask.bins[0](j, 0) = act(j);
    mask.bins[0](j, 1) = 1 - act(j);
    mask.bins[1](j, 0) = 1 - act(j);  // swapped labels
    mask.bins[1](j, 1) = act(j);
  }
  align_frequency_permutations(mask);
  CHECK((mask.bins[0] - mask.bins[1]).norm() == 0.0);
}

TEST_CASE("align_subarray_permutations recovers planted permutations") {
  Rng rng(23);
  const int num_bins = 6, num_frames = 32, n_src = 3;
  SoftMask base;
  base.bins.assign(num_bins, Eigen::MatrixXd(num_frames, n_src));
  for (auto& bin : base.bins) {
    for (int j = 0; j < num_frames; ++j) {
      Eigen::VectorXd row(n_src);
      for (int n = 0; n < n_src; ++n) row(n) = rng.uniform();
      bin.row(j) = (row / row.sum()).transpose();
    }
  }
  // identical masks align with the identity
  auto perms = align_subarray_permutations({base, base});
  for (int n = 0; n < n_src; ++n) CHECK(perms[1][n] == n);

  // planted cyclic shift: subarray 2 holds source (n+1) mod N in slot n
  SoftMask shifted;
  shifted.bins.assign(num_bins, Eigen::MatrixXd(num_frames, n_src));
  for (int i = 0; i < num_bins; ++i)
    for (int n = 0; n < n_src; ++n) shifted.bins[i].col((n + 1) % n_src) = base.bins[i].col(n);
  perms = align_subarray_permutations({base, shifted});
  const SoftMask fixed = permute_mask(shifted, perms[1]);
  for (int i = 0; i < num_bins; ++i) CHECK((fixed.bins[i] - base.bins[i]).norm() < 1e-12);

  // argmax matches an exhaustive search on noisy copies
  SoftMask noisy = shifted;
  for (auto& bin : noisy.bins)
    for (int j = 0; j < num_frames; ++j)
      for (int n = 0; n < n_src; ++n) bin(j, n) = std::max(0.0, bin(j, n) + 0.05 * rng.gaussian());
  perms = align_subarray_permutations({base, noisy});
  // oracle: brute force over all 3! permutations using the same correlation
  auto flat = [&](const SoftMask& m, int n) {
    Eigen::VectorXd v(num_bins * num_frames);
    for (int i = 0; i < num_bins; ++i) v.segment(i * num_frames, num_frames) = m.bins[i].col(n);
    return v;
  };
  auto pearson = [](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const Eigen::VectorXd du = u.array() - u.mean();
    const Eigen::VectorXd dv = v.array() - v.mean();
    return du.dot(dv) / (du.norm() * dv.norm());
  };
  std::vector<int> best;
  double top = -1e300;
  std::vector<int> perm = {0, 1, 2};
  do {
    double s = 0;
    for (int n = 0; n < n_src; ++n) s += pearson(flat(noisy, perm[n]), flat(base, n));
    if (s > top) {
      top = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(perms[1] == best);
}

TEST_CASE("soft_mask_images add up to the observation") {
  Rng rng(31);
  const ObsTensor x = testutil::random_tensor(3, 8, 2, rng);

  SoftMask one;
  one.bins.assign(3, Eigen::MatrixXd::Ones(8, 1));
  auto images = soft_mask_images(x, one);
  for (int i = 0; i < 3; ++i) CHECK((images[0].bins[i] - x.bins[i]).norm() == 0.0);

  SoftMask uniform;
  uniform.bins.assign(3, Eigen::MatrixXd::Constant(8, 3, 1.0 / 3));
  images = soft_mask_images(x, uniform);
  for (int i = 0; i < 3; ++i)
    CHECK((images[1].bins[i] - x.bins[i] / 3.0).norm() < 1e-15);

  SoftMask random_mask;
  random_mask.bins.assign(3, Eigen::MatrixXd(8, 3));
  for (auto& bin : random_mask.bins)
    for (int j = 0; j < 8; ++j) {
      Eigen::Vector3d row(rng.uniform(), rng.uniform(), rng.uniform());
      bin.row(j) = (row / row.sum()).transpose();
    }
  images = soft_mask_images(x, random_mask);
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(2, 8);
    for (const auto& img : images) sum += img.bins[i];
    CHECK((sum - x.bins[i]).norm() <= 1e-12 * x.bins[i].norm());
  }
}

TEST_CASE("init_spectrogram reduces to normalized power for one channel") {
  Rng rng(37);
  ObsTensor c(2, 16, 1);
  for (auto& bin : c.bins) bin = testutil::random_complex(1, 16, rng);
  const auto r = init_scm({c});
  const auto h0 = init_spectrogram({c}, r);
  for (int i = 0; i < 2; ++i) {
    const double mean_power = c.bins[i].squaredNorm() / 16.0;
    for (int j = 0; j < 16; ++j) {
      const double expect = std::norm(c.bins[i](0, j)) / mean_power;
      CHECK(h0[i](j, 0) == doctest::Approx(expect).epsilon(1e-4));  // ridge-regularized
    }
  }

  // constant image over time: h0 is one
  ObsTensor cc(1, 12, 1);
  cc.bins[0].setConstant(cplx(0.7, -0.2));
  const auto rc = init_scm({cc});
  const auto hc = init_spectrogram({cc}, rc);
  for (int j = 0; j < 12; ++j) CHECK(hc[0](j, 0) == doctest::Approx(1.0).epsilon(1e-4));

  // zero image: h0 stays zero
  ObsTensor cz(1, 8, 2);
  const auto rz = init_scm({cz});
  const auto hz = init_spectrogram({cz}, rz);
  CHECK(hz[0].norm() == 0.0);
}

TEST_CASE("itakura_saito_nmf fits a planted rank-one factorization") {
  Rng rng(41);
  const int num_bins = 6, num_frames = 10;
  Eigen::VectorXd t(num_bins), v(num_frames);
  for (int i = 0; i < num_bins; ++i) t(i) = 0.5 + rng.uniform();
  for (int j = 0; j < num_frames; ++j) v(j) = 0.5 + rng.uniform();
  std::vector<Eigen::MatrixXd> h0(num_bins, Eigen::MatrixXd(num_frames, 1));
  for (int i = 0; i < num_bins; ++i)
    for (int j = 0; j < num_frames; ++j) h0[i](j, 0) = t(i) * v(j);

  std::vector<std::vector<double>> trace;
  const NmfModel model = itakura_saito_nmf(h0, 1, 1000, 3, &trace);
  REQUIRE(trace.size() == 1);
  CHECK(trace[0].back() <= 1e-6);
  for (size_t it = 1; it < trace[0].size(); ++it)
    CHECK(trace[0][it] <= trace[0][it - 1] + 1e-9 * std::abs(trace[0][it - 1]));
  const Eigen::MatrixXd rec = model.T[0] * model.V[0];
  for (int i = 0; i < num_bins; ++i)
    for (int j = 0; j < num_frames; ++j)
      CHECK(rec(i, j) == doctest::Approx(t(i) * v(j)).epsilon(1e-3));
}

TEST_CASE("itakura_saito_nmf scalar case converges to the target") {
  // the half-exponent updates close a constant fraction of the log gap per
  // step, so the scalar fit reaches the target geometrically
  std::vector<Eigen::MatrixXd> h0(1, Eigen::MatrixXd::Constant(1, 1, 2.5));
  const NmfModel model = itakura_saito_nmf(h0, 1, 50, 9);
  CHECK(model.T[0](0, 0) * model.V[0](0, 0) == doctest::Approx(2.5).epsilon(1e-3));
}

TEST_CASE("itakura_saito_nmf divergence trace is monotone on random input") {
  Rng rng(47);
  std::vector<Eigen::MatrixXd> h0(5, Eigen::MatrixXd(12, 2));
  for (auto& bin : h0)
    for (int j = 0; j < 12; ++j)
      for (int n = 0; n < 2; ++n) bin(j, n) = 0.1 + rng.uniform();
  std::vector<std::vector<double>> trace;
  itakura_saito_nmf(h0, 3, 200, 5, &trace);
  for (const auto& src : trace)
    for (size_t it = 1; it < src.size(); ++it)
      CHECK(src[it] <= src[it - 1] + 1e-9 * std::abs(src[it - 1]));
}

TEST_CASE("init_spatial on an already-diagonal pair") {
  std::vector<std::vector<Eigen::MatrixXcd>> r(2);
  Eigen::MatrixXcd r1 = Eigen::MatrixXcd::Zero(2, 2);
  r1.diagonal() << 2.0, 1.0;
  r[0] = {r1};
  r[1] = {Eigen::MatrixXcd::Identity(2, 2)};
  std::vector<std::vector<Eigen::MatrixXcd>> w0;
  std::vector<Eigen::MatrixXd> lambda0;
  init_spatial(r, BlockLayout::full(2), w0, lambda0);
  // unit-modulus columns, Lambda rows recover the diagonals
  for (int c = 0; c < 2; ++c)
    CHECK(w0[0][0].col(c).norm() == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(lambda0[0](0, 0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(lambda0[0](0, 1) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(lambda0[0](1, 0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(lambda0[0](1, 1) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("init_spatial diagonalizes commuting pairs and normalizes against R_N") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Eigen::MatrixXcd u = testutil::random_unitary(3, rng);
    Eigen::VectorXd e1(3), e2(3);
    for (int k = 0; k < 3; ++k) {
      e1(k) = 0.5 + rng.uniform();
      e2(k) = 0.5 + rng.uniform();
    }
    std::vector<std::vector<Eigen::MatrixXcd>> r(2);
    r[0] = {u * e1.asDiagonal() * u.adjoint()};
    r[1] = {u * e2.asDiagonal() * u.adjoint()};
    std::vector<std::vector<Eigen::MatrixXcd>> w0;
    std::vector<Eigen::MatrixXd> lambda0;
    init_spatial(r, BlockLayout::full(3), w0, lambda0);
    for (int n = 0; n < 2; ++n) {
      Eigen::MatrixXcd d = w0[0][0].adjoint() * r[n][0] * w0[0][0];
      const double scale = d.norm();
      d.diagonal().setZero();
      CHECK(d.norm() <= 1e-6 * scale);  // ridge shifts the GEVD slightly
    }
    const Eigen::MatrixXcd wrw = w0[0][0].adjoint() * r[1][0] * w0[0][0];
    CHECK((wrw - Eigen::MatrixXcd::Identity(3, 3)).norm() <= 1e-4);
  }
}

TEST_CASE("init_spatial keeps Lambda nonnegative with a non-commuting extra source") {
  Rng rng(53);
  std::vector<std::vector<Eigen::MatrixXcd>> r(3);
  r[0] = {testutil::random_hpd(3, rng)};
  r[1] = {testutil::random_hpd(3, rng)};
  r[2] = {testutil::random_hpd(3, rng)};
  std::vector<std::vector<Eigen::MatrixXcd>> w0;
  std::vector<Eigen::MatrixXd> lambda0;
  init_spatial(r, BlockLayout::full(3), w0, lambda0);
  CHECK(lambda0[0].minCoeff() >= 0.0);
  CHECK(w0[0][0].allFinite());
  // the GEVD pair uses sources N-1 and N
  const Eigen::MatrixXcd wrw = w0[0][0].adjoint() * r[2][0] * w0[0][0];
  CHECK((wrw - Eigen::MatrixXcd::Identity(3, 3)).norm() <= 1e-4);
}

TEST_CASE("slicing the problem before or inside init_spatial agrees") {
  Rng rng(59);
  const BlockLayout layout({2, 3});
  // exactly block-diagonal covariances
  std::vector<std::vector<Eigen::MatrixXcd>> r(2);
  for (int n = 0; n < 2; ++n)
    r[n] = {blkdiag({testutil::random_hpd(2, rng), testutil::random_hpd(3, rng)})};

  std::vector<std::vector<Eigen::MatrixXcd>> w_blocks;
  std::vector<Eigen::MatrixXd> lam_blocks;
  init_spatial(r, layout, w_blocks, lam_blocks);

  for (int l = 0; l < 2; ++l) {
    const int off = layout.offsets[l];
    const int mb = layout.sizes[l];
    std::vector<std::vector<Eigen::MatrixXcd>> r_sub(2);
    for (int n = 0; n < 2; ++n) r_sub[n] = {r[n][0].block(off, off, mb, mb).eval()};
    std::vector<std::vector<Eigen::MatrixXcd>> w_sub;
    std::vector<Eigen::MatrixXd> lam_sub;
    init_spatial(r_sub, BlockLayout::full(mb), w_sub, lam_sub);
    CHECK((w_blocks[l][0] - w_sub[0][0]).norm() == 0.0);
    CHECK((lam_blocks[0].middleCols(off, mb) - lam_sub[0]).norm() == 0.0);
  }
}

TEST_CASE("the whole pipeline is deterministic in the seed") {
  const TwoSourceScene scene = two_source_scene(8, 40, 61);
  InitConfig cfg;
  cfg.num_sources = 2;
  cfg.k_bases = 3;
  cfg.nmf_max_iters = 50;
  const InitBundle a = init_full(scene.x, cfg, 12345);
  const InitBundle b = init_full(scene.x, cfg, 12345);
  const InitBundle c = init_full(scene.x, cfg, 54321);
  CHECK((a.nmf.T[0] - b.nmf.T[0]).norm() == 0.0);
  CHECK((a.lambda0[0] - b.lambda0[0]).norm() == 0.0);
  CHECK((a.w0[0][0] - b.w0[0][0]).norm() == 0.0);
  CHECK((a.nmf.T[0] - c.nmf.T[0]).norm() != 0.0);  // different seed, different start

  // bundles satisfy the estimator preconditions
  for (int n = 0; n < 2; ++n) CHECK(a.nmf.T[n].minCoeff() > 0.0);
  for (const auto& lam : a.lambda0) CHECK(lam.minCoeff() >= kFloor);
}

TEST_CASE("distributed init aligns subarray labels and fills every block") {
  const TwoSourceScene scene2mic = two_source_scene(8, 40, 67);
  // four channels: duplicate the two-mic scene with a small perturbation
  ObsTensor x(8, 40, 4);
  Rng rng(71);
  for (int i = 0; i < 8; ++i) {
    x.bins[i].topRows(2) = scene2mic.x.bins[i];
    x.bins[i].bottomRows(2) =
        scene2mic.x.bins[i] + 0.05 * testutil::random_complex(2, 40, rng);
  }
  const BlockLayout layout({2, 2});
  InitConfig cfg;
  cfg.num_sources = 2;
  cfg.k_bases = 3;
  cfg.nmf_max_iters = 50;
  const InitBundle bundle = init_distributed(x, layout, cfg, 77);
  CHECK(bundle.w0.size() == 2);
  CHECK(bundle.w0[0].size() == 8);
  CHECK(bundle.w0[1][0].rows() == 2);
  CHECK(bundle.lambda0[0].cols() == 4);
  CHECK(bundle.nmf.num_bins() == 8);
  for (const auto& lam : bundle.lambda0) CHECK(lam.minCoeff() >= kFloor);
}
