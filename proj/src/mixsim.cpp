#include "fastmnmf/mixsim.hpp"

#include <json.hpp>

#include <cmath>

namespace fastmnmf {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(M_PI * x) / (M_PI * x);
}
}  // namespace

Eigen::Vector3d Scenario::mic_position(int m) const {
  int at = m;
  for (const auto& sub : subarrays) {
    if (at < static_cast<int>(sub.offsets.size())) return sub.centroid + sub.offsets[at];
    at -= static_cast<int>(sub.offsets.size());
  }
  throw std::out_of_range("Scenario: microphone index out of range");
}

void Scenario::validate() const {
  if (sources.empty() || num_mics() == 0)
    throw std::invalid_argument("Scenario: needs at least one source and one microphone");
  auto inside = [&](const Eigen::Vector3d& p) {
    return p.x() >= 0 && p.y() >= 0 && p.z() >= 0 && p.x() <= room.x() && p.y() <= room.y() &&
           p.z() <= room.z();
  };
  for (const auto& s : sources)
    if (!inside(s.position)) throw std::invalid_argument("Scenario: source outside the room");
  for (int m = 0; m < num_mics(); ++m)
    if (!inside(mic_position(m)))
      throw std::invalid_argument("Scenario: microphone outside the room");
  if (!(sample_rate > 0) || !(duration_s > 0) || !(speed_of_sound > 0))
    throw std::invalid_argument("Scenario: rates and duration must be positive");
  if (reference_mic < 0 || reference_mic >= num_mics())
    throw std::invalid_argument("Scenario: reference mic out of range");
}

Scenario reference_scenario(int num_sources, double sample_rate, double duration_s) {
  if (num_sources != 3 && num_sources != 5)
    throw std::invalid_argument("reference_scenario: supports 3 or 5 sources");
  Scenario s;
  s.sample_rate = sample_rate;
  s.duration_s = duration_s;

  // regular tetrahedron, edge 4.2 cm, base parallel to the floor; the centroid
  // of the four vertices sits at the subarray centroid
  const double edge = 0.042;
  const double base_r = edge / std::sqrt(3.0);
  const double height = edge * std::sqrt(2.0 / 3.0);
  const double subarray_x[3] = {2.0, 3.0, 4.0};
  const double rotation_deg[3] = {0.0, -45.0, -90.0};  // clockwise
  for (int l = 0; l < 3; ++l) {
    SubarraySpec sub;
    sub.centroid = Eigen::Vector3d(subarray_x[l], 2.0, 1.5);
    const double rot = rotation_deg[l] * M_PI / 180.0;
    // base vertices at 90, 210, 330 degrees: the 210-330 edge is parallel to x
    for (double deg : {90.0, 210.0, 330.0}) {
      const double ang = deg * M_PI / 180.0 + rot;
      sub.offsets.emplace_back(base_r * std::cos(ang), base_r * std::sin(ang), -height / 4.0);
    }
    sub.offsets.emplace_back(0.0, 0.0, 3.0 * height / 4.0);
    s.subarrays.push_back(std::move(sub));
  }

  // broadband bursty noise with mild spectral differences: separation is
  // driven by geometry, which keeps the single/distributed/full ordering of
  // array apertures visible at desk scale
  const double colors[5] = {0.5, 0.35, 0.2, 0.42, 0.12};
  const double env_rates[5] = {0.9, 1.1, 1.3, 0.8, 1.5};
  const double env_phases[5] = {0.0, 0.3, 0.6, 0.45, 0.15};
  const std::vector<Eigen::Vector2d> spots3 = {{1.0, 1.0}, {3.0, 3.5}, {5.0, 1.0}};
  const std::vector<Eigen::Vector2d> spots5 = {
      {1.0, 1.0}, {3.0, 3.5}, {5.0, 1.0}, {1.5, 3.0}, {4.5, 3.0}};
  const auto& spots = num_sources == 3 ? spots3 : spots5;
  for (int n = 0; n < num_sources; ++n) {
    SourceSpec src;
    src.position = Eigen::Vector3d(spots[n].x(), spots[n].y(), 1.5);
    src.kind = "noise";
    src.color = colors[n];
    src.env_rate_hz = env_rates[n];
    src.env_duty = 0.55;
    src.env_phase = env_phases[n];
    s.sources.push_back(std::move(src));
  }
  return s;
}

std::string scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["room"] = {s.room.x(), s.room.y(), s.room.z()};
  j["speed_of_sound"] = s.speed_of_sound;
  j["sample_rate"] = s.sample_rate;
  j["duration_s"] = s.duration_s;
  j["reference_mic"] = s.reference_mic;
  for (const auto& sub : s.subarrays) {
    nlohmann::json js;
    js["centroid"] = {sub.centroid.x(), sub.centroid.y(), sub.centroid.z()};
    for (const auto& o : sub.offsets) js["offsets"].push_back({o.x(), o.y(), o.z()});
    j["subarrays"].push_back(js);
  }
  for (const auto& src : s.sources) {
    nlohmann::json js;
    js["position"] = {src.position.x(), src.position.y(), src.position.z()};
    js["kind"] = src.kind;
    js["color"] = src.color;
    js["carrier_hz"] = src.carrier_hz;
    js["env_rate_hz"] = src.env_rate_hz;
    js["env_duty"] = src.env_duty;
    js["env_phase"] = src.env_phase;
    j["sources"].push_back(js);
  }
  return j.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  Scenario s;
  auto vec3 = [](const nlohmann::json& a) {
    return Eigen::Vector3d(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
  };
  s.room = vec3(j.at("room"));
  s.speed_of_sound = j.value("speed_of_sound", 343.0);
  s.sample_rate = j.at("sample_rate").get<double>();
  s.duration_s = j.at("duration_s").get<double>();
  s.reference_mic = j.value("reference_mic", 0);
  for (const auto& js : j.at("subarrays")) {
    SubarraySpec sub;
    sub.centroid = vec3(js.at("centroid"));
    for (const auto& o : js.at("offsets")) sub.offsets.push_back(vec3(o));
    s.subarrays.push_back(std::move(sub));
  }
  for (const auto& js : j.at("sources")) {
    SourceSpec src;
    src.position = vec3(js.at("position"));
    src.kind = js.value("kind", std::string("noise"));
    src.color = js.value("color", 0.0);
    src.carrier_hz = js.value("carrier_hz", 0.0);
    src.env_rate_hz = js.value("env_rate_hz", 1.0);
    src.env_duty = js.value("env_duty", 0.5);
    src.env_phase = js.value("env_phase", 0.0);
    s.sources.push_back(std::move(src));
  }
  s.validate();
  return s;
}

std::vector<std::vector<Eigen::VectorXd>> delay_rirs(const Scenario& s) {
  constexpr int kTaps = 64;
  std::vector<std::vector<Eigen::VectorXd>> rirs(s.sources.size());
  for (size_t n = 0; n < s.sources.size(); ++n) {
    rirs[n].resize(s.num_mics());
    for (int m = 0; m < s.num_mics(); ++m) {
      const double dist = (s.sources[n].position - s.mic_position(m)).norm();
      if (dist < 0.01)
        throw CoincidentPositions("delay_rirs: source and microphone closer than 1 cm");
      const double delay = dist / s.speed_of_sound * s.sample_rate;
      const double gain = 1.0 / dist;
      const int t0 = std::max(0, static_cast<int>(std::floor(delay)) - kTaps / 2 + 1);
      const int t1 = static_cast<int>(std::floor(delay)) + kTaps / 2;
      Eigen::VectorXd rir = Eigen::VectorXd::Zero(t1 + 1);
      for (int t = t0; t <= t1; ++t) {
        const double u = static_cast<double>(t) - delay;
        // Hann taper reaching zero at |u| = kTaps/2
        const double w = 0.5 + 0.5 * std::cos(2.0 * M_PI * u / kTaps);
        rir(t) = gain * sinc(u) * w;
      }
      rirs[n][m] = std::move(rir);
    }
  }
  return rirs;
}

Eigen::VectorXd make_dry_source(const SourceSpec& spec, int length, double sample_rate,
                                std::uint64_t seed) {
  Rng rng = derive_rng(seed, "dry");
  Eigen::VectorXd x(length);
  if (spec.kind == "am_tone") {
    const double phase0 = rng.uniform() * kTwoPi;
    for (int t = 0; t < length; ++t) {
      const double tt = static_cast<double>(t) / sample_rate;
      // slight vibrato keeps the tone off an exact bin center
      const double f = spec.carrier_hz * (1.0 + 0.01 * std::sin(kTwoPi * 0.5 * tt));
      x(t) = std::sin(kTwoPi * f * tt + phase0) +
             0.6 * std::sin(2.0 * kTwoPi * f * tt + 1.7 * phase0) +
             0.35 * std::sin(3.0 * kTwoPi * f * tt + 0.4 * phase0);
    }
  } else if (spec.kind == "noise") {
    double state = 0.0;
    const double a = std::abs(spec.color);
    for (int t = 0; t < length; ++t) {
      const double white = rng.gaussian();
      state = a * state + (1.0 - a) * white;
      x(t) = spec.color >= 0.0 ? state : white - state;  // dark or bright band
    }
  } else {
    throw std::invalid_argument("make_dry_source: unknown kind " + spec.kind);
  }
  // bursty on/off activity with raised-cosine edges; the sparse time-frequency
  // overlap is what bin-wise clustering keys on
  const double period = 1.0 / std::max(spec.env_rate_hz, 1e-6);
  const double ramp = std::min(0.03, 0.15 * period);
  const double duty = std::min(0.95, std::max(0.05, spec.env_duty));
  for (int t = 0; t < length; ++t) {
    const double tt = static_cast<double>(t) / sample_rate;
    double pos = std::fmod(tt / period + spec.env_phase, 1.0);
    if (pos < 0) pos += 1.0;
    const double on = duty;
    double env;
    if (pos < ramp / period)
      env = 0.5 - 0.5 * std::cos(M_PI * pos * period / ramp);
    else if (pos < on - ramp / period)
      env = 1.0;
    else if (pos < on)
      env = 0.5 + 0.5 * std::cos(M_PI * (pos - (on - ramp / period)) * period / ramp);
    else
      env = 0.0;
    x(t) *= 0.02 + 0.98 * env;  // keep a faint floor so the source is never exactly zero
  }
  const double rms = std::sqrt(x.squaredNorm() / length);
  if (rms > 0) x /= rms;
  return x;
}

GroundTruth convolve_mix(const std::vector<Eigen::VectorXd>& dry,
                         const std::vector<std::vector<Eigen::VectorXd>>& rirs,
                         int reference_mic) {
  if (dry.empty() || rirs.size() != dry.size())
    throw ShapeMismatch("convolve_mix: need one RIR set per dry source");
  const int t_len = static_cast<int>(dry[0].size());
  const int m_chan = static_cast<int>(rirs[0].size());

  GroundTruth out;
  out.dry = dry;
  out.reference_mic = reference_mic;
  out.images.assign(dry.size(), Eigen::MatrixXd::Zero(t_len, m_chan));
  for (size_t n = 0; n < dry.size(); ++n) {
    if (dry[n].squaredNorm() == 0.0) throw SilentSource("convolve_mix: silent dry source");
    for (int m = 0; m < m_chan; ++m) {
      const Eigen::VectorXd& rir = rirs[n][m];
      for (int p = 0; p < rir.size(); ++p) {
        if (rir(p) == 0.0) continue;
        const int len = t_len - p;
        if (len <= 0) break;
        out.images[n].col(m).tail(len) += rir(p) * dry[n].head(len);
      }
    }
    const double power =
        out.images[n].col(reference_mic).squaredNorm() / static_cast<double>(t_len);
    if (power <= 0.0) throw SilentSource("convolve_mix: zero image at the reference mic");
    out.images[n] /= std::sqrt(power);
  }
  out.mixture = Eigen::MatrixXd::Zero(t_len, m_chan);
  for (const auto& img : out.images) out.mixture += img;
  return out;
}

GroundTruth simulate(const Scenario& s, std::uint64_t seed) {
  s.validate();
  const int length = static_cast<int>(std::lround(s.duration_s * s.sample_rate));
  std::vector<Eigen::VectorXd> dry;
  dry.reserve(s.sources.size());
  for (size_t n = 0; n < s.sources.size(); ++n)
    dry.push_back(make_dry_source(s.sources[n], length, s.sample_rate,
                                  derive_seed(seed, "source", n)));
  return convolve_mix(dry, delay_rirs(s), s.reference_mic);
}

SampledModel sample_model(const std::vector<std::vector<Eigen::MatrixXcd>>& r,
                          const std::vector<Eigen::MatrixXd>& h, std::uint64_t seed) {
  const int n_src = static_cast<int>(r.size());
  const int num_bins = static_cast<int>(h.size());
  const int j_frames = static_cast<int>(h[0].rows());
  const int m_chan = static_cast<int>(r[0][0].rows());
  if (static_cast<int>(h[0].cols()) != n_src)
    throw ShapeMismatch("sample_model: h columns must match the source count");

  // one covariance factor per (source, bin), reused across frames
  std::vector<std::vector<Eigen::MatrixXcd>> factor(n_src);
  for (int n = 0; n < n_src; ++n) {
    factor[n].reserve(num_bins);
    for (int i = 0; i < num_bins; ++i) {
      const Eigen::MatrixXcd& rn = r[n][i];
      Eigen::LLT<Eigen::MatrixXcd> llt(rn);
      if (llt.info() == Eigen::Success) {
        factor[n].push_back(llt.matrixL());
        continue;
      }
      // PSD but rank deficient: square root via the eigendecomposition
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rn);
      const double lam_max = std::max(es.eigenvalues().maxCoeff(), 0.0);
      if (es.eigenvalues().minCoeff() < -1e-8 * std::max(lam_max, 1e-300))
        throw NotPositiveDefinite("sample_model: covariance has a negative eigenvalue");
      factor[n].push_back(es.eigenvectors() *
                          es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
    }
  }

  SampledModel out;
  out.x = ObsTensor(num_bins, j_frames, m_chan);
  out.images.assign(n_src, ObsTensor(num_bins, j_frames, m_chan));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Eigen::VectorXcd z(m_chan);
  for (int i = 0; i < num_bins; ++i) {
    for (int j = 0; j < j_frames; ++j) {
      Rng rng = derive_rng(seed, "frame",
                           static_cast<std::uint64_t>(i) * j_frames + j);
      for (int n = 0; n < n_src; ++n) {
        for (int m = 0; m < m_chan; ++m)
          z(m) = cplx(rng.gaussian(), rng.gaussian()) * inv_sqrt2;
        const Eigen::VectorXcd c = std::sqrt(h[i](j, n)) * (factor[n][i] * z);
        out.images[n].bins[i].col(j) = c;
        out.x.bins[i].col(j) += c;
      }
    }
  }
  return out;
}

}  // namespace fastmnmf
