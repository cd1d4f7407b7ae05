#include "fastmnmf/init.hpp"

#include "fastmnmf/hermlin.hpp"

#include <algorithm>
#include <numeric>

namespace fastmnmf {

namespace {

constexpr double kSilentNorm = 1e-300;

double pearson(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double mu = u.mean(), mv = v.mean();
  const Eigen::VectorXd du = u.array() - mu;
  const Eigen::VectorXd dv = v.array() - mv;
  const double den = du.norm() * dv.norm();
  if (den <= 0) return 0.0;
  return du.dot(dv) / den;
}

// Best source permutation of `cand` columns against `ref` columns by summed
// Pearson correlation; enumeration is lexicographic so ties keep the smallest.
std::vector<int> best_permutation(const Eigen::MatrixXd& cand, const Eigen::MatrixXd& ref) {
  const int n = static_cast<int>(ref.cols());
  if (n > 8)
    throw std::invalid_argument("permutation alignment: too many sources for exhaustive search");
  std::vector<int> perm(n), best(n);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_score = -std::numeric_limits<double>::infinity();
  do {
    double score = 0.0;
    for (int c = 0; c < n; ++c) score += pearson(cand.col(perm[c]), ref.col(c));
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void apply_permutation(Eigen::MatrixXd& mask, const std::vector<int>& perm) {
  Eigen::MatrixXd out(mask.rows(), mask.cols());
  for (int c = 0; c < static_cast<int>(perm.size()); ++c) out.col(c) = mask.col(perm[c]);
  mask = std::move(out);
}

bool is_identity(const std::vector<int>& perm) {
  for (int c = 0; c < static_cast<int>(perm.size()); ++c)
    if (perm[c] != c) return false;
  return true;
}

// Phase-referenced unit vectors for one bin; silent frames are flagged false.
void bin_features(const Eigen::MatrixXcd& xi, std::vector<Eigen::VectorXcd>& feat,
                  std::vector<bool>& usable) {
  const int j_frames = static_cast<int>(xi.cols());
  feat.assign(j_frames, Eigen::VectorXcd());
  usable.assign(j_frames, false);
  for (int j = 0; j < j_frames; ++j) {
    const double nrm = xi.col(j).norm();
    if (nrm < kSilentNorm) continue;
    Eigen::VectorXcd f = xi.col(j) / nrm;
    // remove the global phase so frames of one source line up
    const cplx ref = f(0);
    if (std::abs(ref) > 0) f *= std::conj(ref) / std::abs(ref);
    feat[j] = std::move(f);
    usable[j] = true;
  }
}

}  // namespace

SoftMask cluster_masks(const ObsTensor& x, int num_sources, std::uint64_t seed,
                       const MaskOptions& options) {
  if (num_sources < 1) throw std::invalid_argument("cluster_masks: need at least one source");
  const int num_bins = x.num_bins();
  const int j_frames = x.num_frames();
  if (j_frames < num_sources)
    throw std::invalid_argument("cluster_masks: fewer frames than sources");

  SoftMask mask;
  mask.bins.assign(num_bins,
                   Eigen::MatrixXd::Constant(j_frames, num_sources, 1.0 / num_sources));
  if (num_sources == 1) return mask;

  std::vector<Eigen::VectorXcd> feat;
  std::vector<bool> usable;
  for (int i = 0; i < num_bins; ++i) {
    bin_features(x.bins[i], feat, usable);
    std::vector<int> idx;
    for (int j = 0; j < j_frames; ++j)
      if (usable[j]) idx.push_back(j);
    if (static_cast<int>(idx.size()) < num_sources) continue;  // degenerate: keep uniform

    Rng rng = derive_rng(seed, "kmeans", static_cast<std::uint64_t>(i));

    // k-means++ seeding
    std::vector<Eigen::VectorXcd> centroid;
    centroid.push_back(feat[idx[rng.next_below(static_cast<std::uint32_t>(idx.size()))]]);
    std::vector<double> d2(idx.size());
    while (static_cast<int>(centroid.size()) < num_sources) {
      double total = 0.0;
      for (size_t p = 0; p < idx.size(); ++p) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : centroid)
          best = std::min(best, (feat[idx[p]] - c).squaredNorm());
        d2[p] = best;
        total += best;
      }
      size_t pick = 0;
      if (total > 0) {
        double r = rng.uniform() * total;
        for (; pick + 1 < idx.size(); ++pick) {
          r -= d2[pick];
          if (r <= 0) break;
        }
      } else {
        pick = rng.next_below(static_cast<std::uint32_t>(idx.size()));
      }
      centroid.push_back(feat[idx[pick]]);
    }

    // Lloyd iterations with cosine-style renormalized centroids
    std::vector<int> assign(idx.size(), -1);
    for (int it = 0; it < options.kmeans_iters; ++it) {
      bool changed = false;
      for (size_t p = 0; p < idx.size(); ++p) {
        int arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int c = 0; c < num_sources; ++c) {
          const double d = (feat[idx[p]] - centroid[c]).squaredNorm();
          if (d < best) {
            best = d;
            arg = c;
          }
        }
        if (assign[p] != arg) changed = true;
        assign[p] = arg;
      }
      std::vector<Eigen::VectorXcd> sum(num_sources,
                                        Eigen::VectorXcd::Zero(x.num_channels()));
      std::vector<int> count(num_sources, 0);
      for (size_t p = 0; p < idx.size(); ++p) {
        sum[assign[p]] += feat[idx[p]];
        ++count[assign[p]];
      }
      for (int c = 0; c < num_sources; ++c) {
        if (count[c] == 0) {
          // reseed an empty cluster at the point farthest from its centroid
          size_t far = 0;
          double best = -1.0;
          for (size_t p = 0; p < idx.size(); ++p) {
            const double d = (feat[idx[p]] - centroid[assign[p]]).squaredNorm();
            if (d > best) {
              best = d;
              far = p;
            }
          }
          centroid[c] = feat[idx[far]];
          continue;
        }
        Eigen::VectorXcd c_new = sum[c] / static_cast<double>(count[c]);
        const double nrm = c_new.norm();
        if (nrm > 0) c_new /= nrm;
        centroid[c] = std::move(c_new);
      }
      if (!changed && it > 0) break;
    }

    // soft assignment: softmax of negative squared distance
    Eigen::MatrixXd& mi = mask.bins[i];
    for (int j = 0; j < j_frames; ++j) {
      if (!usable[j]) continue;  // silent frame keeps the uniform row
      Eigen::VectorXd logit(num_sources);
      for (int c = 0; c < num_sources; ++c)
        logit(c) = -(feat[j] - centroid[c]).squaredNorm() / options.softmax_temperature;
      const double mx = logit.maxCoeff();
      Eigen::VectorXd w = (logit.array() - mx).exp();
      mi.row(j) = (w / w.sum()).transpose();
    }
  }

  align_frequency_permutations(mask, options);
  return mask;
}

void align_frequency_permutations(SoftMask& mask, const MaskOptions& options) {
  const int num_bins = mask.num_bins();
  const int n_src = mask.num_sources();
  if (num_bins == 0 || n_src < 2) return;

  // local pass: align each bin to the mean of its already-aligned predecessors
  for (int i = 1; i < num_bins; ++i) {
    const int lo = std::max(0, i - options.align_neighborhood);
    Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(mask.bins[i].rows(), n_src);
    for (int p = lo; p < i; ++p) ref += mask.bins[p];
    ref /= static_cast<double>(i - lo);
    const std::vector<int> perm = best_permutation(mask.bins[i], ref);
    if (!is_identity(perm)) apply_permutation(mask.bins[i], perm);
  }

  // global rounds against one centroid sequence per source
  for (int round = 0; round < options.align_rounds; ++round) {
    Eigen::MatrixXd centroid = Eigen::MatrixXd::Zero(mask.bins[0].rows(), n_src);
    for (int i = 0; i < num_bins; ++i) centroid += mask.bins[i];
    centroid /= static_cast<double>(num_bins);
    bool changed = false;
    for (int i = 0; i < num_bins; ++i) {
      const std::vector<int> perm = best_permutation(mask.bins[i], centroid);
      if (!is_identity(perm)) {
        apply_permutation(mask.bins[i], perm);
        changed = true;
      }
    }
    if (!changed) break;
  }
}

std::vector<std::vector<int>> align_subarray_permutations(const std::vector<SoftMask>& masks) {
  if (masks.size() < 2)
    throw std::invalid_argument("align_subarray_permutations: need at least two subarrays");
  const int n_src = masks[0].num_sources();
  const int num_bins = masks[0].num_bins();
  const int j_frames = masks[0].num_frames();
  for (const auto& m : masks)
    if (m.num_sources() != n_src || m.num_bins() != num_bins || m.num_frames() != j_frames)
      throw ShapeMismatch("align_subarray_permutations: mask shapes differ");

  // flatten each source's mask over all time-frequency points
  auto flatten = [&](const SoftMask& m) {
    Eigen::MatrixXd flat(static_cast<Eigen::Index>(num_bins) * j_frames, n_src);
    for (int i = 0; i < num_bins; ++i)
      flat.middleRows(static_cast<Eigen::Index>(i) * j_frames, j_frames) = m.bins[i];
    return flat;
  };

  const Eigen::MatrixXd ref = flatten(masks[0]);
  std::vector<std::vector<int>> perms;
  perms.reserve(masks.size());
  std::vector<int> identity(n_src);
  std::iota(identity.begin(), identity.end(), 0);
  perms.push_back(identity);
  for (size_t l = 1; l < masks.size(); ++l)
    perms.push_back(best_permutation(flatten(masks[l]), ref));
  return perms;
}

SoftMask permute_mask(const SoftMask& mask, const std::vector<int>& permutation) {
  SoftMask out = mask;
  for (auto& bin : out.bins) apply_permutation(bin, permutation);
  return out;
}

std::vector<ObsTensor> soft_mask_images(const ObsTensor& x, const SoftMask& mask) {
  if (mask.num_bins() != x.num_bins() || mask.num_frames() != x.num_frames())
    throw ShapeMismatch("soft_mask_images: mask does not match observations");
  const int n_src = mask.num_sources();
  std::vector<ObsTensor> images(
      n_src, ObsTensor(x.num_bins(), x.num_frames(), x.num_channels()));
  for (int i = 0; i < x.num_bins(); ++i)
    for (int n = 0; n < n_src; ++n)
      images[n].bins[i] = x.bins[i] * mask.bins[i].col(n).asDiagonal();
  return images;
}

std::vector<std::vector<Eigen::MatrixXcd>> init_scm(const std::vector<ObsTensor>& images) {
  std::vector<std::vector<Eigen::MatrixXcd>> r(images.size());
  for (size_t n = 0; n < images.size(); ++n) {
    const ObsTensor& c = images[n];
    r[n].reserve(c.num_bins());
    for (int i = 0; i < c.num_bins(); ++i)
      r[n].push_back((c.bins[i] * c.bins[i].adjoint()) / static_cast<double>(c.num_frames()));
  }
  return r;
}

std::vector<Eigen::MatrixXd> init_spectrogram(
    const std::vector<ObsTensor>& images,
    const std::vector<std::vector<Eigen::MatrixXcd>>& r_init) {
  const int n_src = static_cast<int>(images.size());
  const int num_bins = images[0].num_bins();
  const int j_frames = images[0].num_frames();
  const int m_chan = images[0].num_channels();
  std::vector<Eigen::MatrixXd> h0(num_bins, Eigen::MatrixXd::Zero(j_frames, n_src));
  for (int n = 0; n < n_src; ++n) {
    for (int i = 0; i < num_bins; ++i) {
      const Eigen::MatrixXcd& r = r_init[n][i];
      const double ridge = 1e-6 * r.real().trace() / m_chan;
      if (!(ridge > 0)) continue;  // zero image: h0 stays 0, floored downstream
      Eigen::MatrixXcd reg = r + ridge * Eigen::MatrixXcd::Identity(m_chan, m_chan);
      Eigen::LLT<Eigen::MatrixXcd> llt(reg);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::MatrixXcd& c = images[n].bins[i];
      const Eigen::MatrixXcd z = llt.solve(c);
      h0[i].col(n) = (c.conjugate().cwiseProduct(z)).colwise().sum().real().transpose() /
                     static_cast<double>(m_chan);
      h0[i].col(n) = h0[i].col(n).cwiseMax(0.0);
    }
  }
  return h0;
}

NmfModel itakura_saito_nmf(const std::vector<Eigen::MatrixXd>& h0, int k, int max_iters,
                           std::uint64_t seed,
                           std::vector<std::vector<double>>* divergence_trace) {
  const int num_bins = static_cast<int>(h0.size());
  const int j_frames = static_cast<int>(h0[0].rows());
  const int n_src = static_cast<int>(h0[0].cols());
  constexpr double kEps = 1e-12;

  NmfModel model;
  model.K = k;
  for (int n = 0; n < n_src; ++n) {
    Eigen::MatrixXd target(num_bins, j_frames);
    for (int i = 0; i < num_bins; ++i) target.row(i) = h0[i].col(n).transpose();
    target = target.cwiseMax(kFloor);

    Rng rng = derive_rng(seed, "is-nmf", static_cast<std::uint64_t>(n));
    const double scale = std::sqrt(target.mean() / k);
    Eigen::MatrixXd t(num_bins, k), v(k, j_frames);
    for (int i = 0; i < num_bins; ++i)
      for (int c = 0; c < k; ++c) t(i, c) = scale * (kEps + rng.uniform());
    for (int c = 0; c < k; ++c)
      for (int j = 0; j < j_frames; ++j) v(c, j) = scale * (kEps + rng.uniform());

    auto divergence = [&](const Eigen::MatrixXd& rec) {
      const Eigen::ArrayXXd ratio = target.array() / rec.array().max(kEps);
      return (ratio - ratio.log() - 1.0).sum();
    };

    Eigen::MatrixXd rec = t * v;
    double prev = divergence(rec);
    std::vector<double>* trace = nullptr;
    if (divergence_trace) {
      divergence_trace->emplace_back();
      trace = &divergence_trace->back();
      trace->push_back(prev);
    }
    for (int it = 0; it < max_iters; ++it) {
      // beta = 0 multiplicative updates with exponent 1/2 (monotone regime)
      const Eigen::MatrixXd inv = rec.cwiseMax(kEps).cwiseInverse();
      const Eigen::MatrixXd inv2x = inv.cwiseProduct(inv).cwiseProduct(target);
      t = (t.array() * ((inv2x * v.transpose()).array() /
                        (inv * v.transpose()).array().max(kEps))
                           .sqrt())
              .max(kEps)
              .matrix();
      rec.noalias() = t * v;
      const Eigen::MatrixXd inv_b = rec.cwiseMax(kEps).cwiseInverse();
      const Eigen::MatrixXd inv2x_b = inv_b.cwiseProduct(inv_b).cwiseProduct(target);
      v = (v.array() * ((t.transpose() * inv2x_b).array() /
                        (t.transpose() * inv_b).array().max(kEps))
                           .sqrt())
              .max(kEps)
              .matrix();
      rec.noalias() = t * v;
      const double cur = divergence(rec);
      if (trace) trace->push_back(cur);
      if (prev - cur < 1e-8 * (1.0 + std::abs(prev))) {
        prev = cur;
        break;
      }
      prev = cur;
    }
    model.T.push_back(std::move(t));
    model.V.push_back(std::move(v));
  }
  return model;
}

void init_spatial(const std::vector<std::vector<Eigen::MatrixXcd>>& r_init,
                  const BlockLayout& layout,
                  std::vector<std::vector<Eigen::MatrixXcd>>& w0,
                  std::vector<Eigen::MatrixXd>& lambda0) {
  const int n_src = static_cast<int>(r_init.size());
  if (n_src < 2) throw std::invalid_argument("init_spatial: needs at least two sources");
  const int num_bins = static_cast<int>(r_init[0].size());

  w0.assign(layout.num_blocks(), std::vector<Eigen::MatrixXcd>());
  lambda0.assign(num_bins, Eigen::MatrixXd::Zero(n_src, layout.total));

  for (int l = 0; l < layout.num_blocks(); ++l) {
    const int off = layout.offsets[l];
    const int mb = layout.sizes[l];
    w0[l].reserve(num_bins);
    for (int i = 0; i < num_bins; ++i) {
      const Eigen::MatrixXcd a = r_init[n_src - 2][i].block(off, off, mb, mb);
      const Eigen::MatrixXcd b = r_init[n_src - 1][i].block(off, off, mb, mb);
      const double ra = 1e-6 * a.real().trace() / mb;
      const double rb = 1e-6 * b.real().trace() / mb;
      Eigen::MatrixXcd w;
      if (rb > 0) {
        const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(mb, mb);
        w = gevd_joint_diag(a + std::max(ra, 0.0) * id, b + rb * id).w;
      } else {
        w = Eigen::MatrixXcd::Identity(mb, mb);  // silent block
      }
      for (int n = 0; n < n_src; ++n)
        lambda0[i].row(n).segment(off, mb) =
            ddiag(w.adjoint() * r_init[n][i].block(off, off, mb, mb) * w).transpose();
      w0[l].push_back(std::move(w));
    }
  }
}

namespace {

InitBundle assemble_bundle(const ObsTensor& x, const BlockLayout& layout, const InitConfig& cfg,
                           std::uint64_t seed, SoftMask mask) {
  InitBundle bundle;
  bundle.layout = layout;
  bundle.mask = std::move(mask);
  const std::vector<ObsTensor> images = soft_mask_images(x, bundle.mask);
  bundle.r_init = init_scm(images);
  bundle.h0 = init_spectrogram(images, bundle.r_init);
  bundle.nmf =
      itakura_saito_nmf(bundle.h0, cfg.k_bases, cfg.nmf_max_iters, derive_seed(seed, "is-nmf"));
  init_spatial(bundle.r_init, layout, bundle.w0, bundle.lambda0);
  for (auto& lam : bundle.lambda0) lam = lam.cwiseMax(kFloor);
  return bundle;
}

}  // namespace

InitBundle init_full(const ObsTensor& x, const InitConfig& cfg, std::uint64_t seed) {
  SoftMask mask =
      cluster_masks(x, cfg.num_sources, derive_seed(seed, "mask"), cfg.mask_options);
  return assemble_bundle(x, BlockLayout::full(x.num_channels()), cfg, seed, std::move(mask));
}

InitBundle init_distributed(const ObsTensor& x, const BlockLayout& layout, const InitConfig& cfg,
                            std::uint64_t seed) {
  if (layout.total != x.num_channels())
    throw ShapeMismatch("init_distributed: layout/channel mismatch");
  std::vector<SoftMask> masks;
  masks.reserve(layout.num_blocks());
  for (int l = 0; l < layout.num_blocks(); ++l)
    masks.push_back(cluster_masks(extract_block(x, layout, l), cfg.num_sources,
                                  derive_seed(seed, "mask", l), cfg.mask_options));

  if (layout.num_blocks() > 1) {
    const auto perms = align_subarray_permutations(masks);
    for (int l = 1; l < layout.num_blocks(); ++l)
      masks[l] = permute_mask(masks[l], perms[l]);
  }

  // per-subarray masked images concatenated along the channel axis
  std::vector<ObsTensor> images(cfg.num_sources,
                                ObsTensor(x.num_bins(), x.num_frames(), x.num_channels()));
  for (int l = 0; l < layout.num_blocks(); ++l) {
    const int off = layout.offsets[l];
    const int mb = layout.sizes[l];
    for (int i = 0; i < x.num_bins(); ++i)
      for (int n = 0; n < cfg.num_sources; ++n)
        images[n].bins[i].middleRows(off, mb) =
            x.bins[i].middleRows(off, mb) * masks[l].bins[i].col(n).asDiagonal();
  }

  InitBundle bundle;
  bundle.layout = layout;
  bundle.mask = std::move(masks[0]);  // reference subarray's aligned mask, for audits
  bundle.r_init = init_scm(images);
  bundle.h0 = init_spectrogram(images, bundle.r_init);
  bundle.nmf =
      itakura_saito_nmf(bundle.h0, cfg.k_bases, cfg.nmf_max_iters, derive_seed(seed, "is-nmf"));
  init_spatial(bundle.r_init, layout, bundle.w0, bundle.lambda0);
  for (auto& lam : bundle.lambda0) lam = lam.cwiseMax(kFloor);
  return bundle;
}

InitBundle slice_init(const InitBundle& init, int block) {
  const BlockLayout& layout = init.layout;
  const int off = layout.offsets.at(block);
  const int mb = layout.sizes.at(block);
  InitBundle out;
  out.layout = BlockLayout::full(mb);
  out.nmf = init.nmf;
  out.w0 = {init.w0.at(block)};
  out.lambda0.reserve(init.lambda0.size());
  for (const auto& lam : init.lambda0) out.lambda0.push_back(lam.middleCols(off, mb));
  out.h0 = init.h0;
  out.mask = init.mask;
  if (!init.r_init.empty()) {
    out.r_init.resize(init.r_init.size());
    for (size_t n = 0; n < init.r_init.size(); ++n) {
      out.r_init[n].reserve(init.r_init[n].size());
      for (const auto& r : init.r_init[n]) out.r_init[n].push_back(r.block(off, off, mb, mb));
    }
  }
  return out;
}

InitBundle random_init(int num_bins, int num_frames, const BlockLayout& layout, int num_sources,
                       int k, std::uint64_t seed) {
  InitBundle bundle;
  bundle.layout = layout;
  Rng rng = derive_rng(seed, "random-init");
  bundle.nmf = NmfModel::random(num_bins, num_frames, num_sources, k, rng);
  bundle.lambda0.reserve(num_bins);
  for (int i = 0; i < num_bins; ++i) {
    Eigen::MatrixXd lam(num_sources, layout.total);
    for (int n = 0; n < num_sources; ++n)
      for (int m = 0; m < layout.total; ++m) lam(n, m) = 0.5 + rng.uniform();
    bundle.lambda0.push_back(std::move(lam));
  }
  bundle.w0.resize(layout.num_blocks());
  for (int l = 0; l < layout.num_blocks(); ++l) {
    const int mb = layout.sizes[l];
    bundle.w0[l].reserve(num_bins);
    for (int i = 0; i < num_bins; ++i) {
      Eigen::MatrixXcd w = Eigen::MatrixXcd::Identity(mb, mb);
      for (int r = 0; r < mb; ++r)
        for (int c = 0; c < mb; ++c) w(r, c) += cplx(0.3 * rng.gaussian(), 0.3 * rng.gaussian());
      bundle.w0[l].push_back(std::move(w));
    }
  }
  return bundle;
}

}  // namespace fastmnmf
