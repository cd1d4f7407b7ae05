// Synthetic mixtures: STFT-domain sampling from the generative model,
// delay-attenuation impulse responses for a room scenario, seeded dry-source
// generators and power-normalized convolutive mixing.
#pragma once

#include "fastmnmf/model.hpp"

#include <string>

namespace fastmnmf {

struct SubarraySpec {
  Eigen::Vector3d centroid;
  std::vector<Eigen::Vector3d> offsets;  // microphone positions relative to the centroid
};

struct SourceSpec {
  Eigen::Vector3d position;
  std::string kind = "noise";  // "noise" or "am_tone"
  double color = 0.0;       // one-pole coefficient; negative keeps the high band
  double carrier_hz = 0.0;  // tone fundamental
  // amplitude bursts (speech-like on/off activity); rate in bursts per second
  double env_rate_hz = 1.0;
  double env_duty = 0.5;
  double env_phase = 0.0;  // fraction of a burst period
};

struct Scenario {
  Eigen::Vector3d room{6.0, 4.0, 2.5};
  std::vector<SubarraySpec> subarrays;
  std::vector<SourceSpec> sources;
  double speed_of_sound = 343.0;
  double sample_rate = 16000.0;
  double duration_s = 10.0;
  int reference_mic = 0;

  int num_mics() const {
    int m = 0;
    for (const auto& s : subarrays) m += static_cast<int>(s.offsets.size());
    return m;
  }
  BlockLayout layout() const {
    std::vector<int> sizes;
    for (const auto& s : subarrays) sizes.push_back(static_cast<int>(s.offsets.size()));
    return BlockLayout(sizes);
  }
  Eigen::Vector3d mic_position(int m) const;
  void validate() const;  // positions inside the room, at least one source and mic
};

/// Three tetrahedral four-mic subarrays at (2,2), (3,2), (4,2) m, edge 4.2 cm,
/// rotated 0/45/90 degrees, sources at the fixed three- or five-source spots.
Scenario reference_scenario(int num_sources, double sample_rate, double duration_s);

std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);

struct GroundTruth {
  std::vector<Eigen::VectorXd> dry;         // per source
  std::vector<Eigen::MatrixXd> images;      // per source: T x M
  Eigen::MatrixXd mixture;                  // T x M, exact sample-wise sum of images
  int reference_mic = 0;
};

/// Windowed-sinc fractional-delay impulse responses with 1/distance gain,
/// rirs[n][m]. Throws CoincidentPositions for distances under 1 cm.
std::vector<std::vector<Eigen::VectorXd>> delay_rirs(const Scenario& s);

/// Seeded dry-source waveform, unit RMS before mixing gains.
Eigen::VectorXd make_dry_source(const SourceSpec& spec, int length, double sample_rate,
                                std::uint64_t seed);

/// Convolves, scales every source so its image power at the reference mic is
/// one, and sums. Throws SilentSource for an all-zero dry signal.
GroundTruth convolve_mix(const std::vector<Eigen::VectorXd>& dry,
                         const std::vector<std::vector<Eigen::VectorXd>>& rirs,
                         int reference_mic);

/// Dry sources + RIRs + mixing for a scenario, deterministic per seed.
GroundTruth simulate(const Scenario& s, std::uint64_t seed);

struct SampledModel {
  ObsTensor x;
  std::vector<ObsTensor> images;  // per source
};

/// Draws c_ijn ~ CN(0, h_ijn R_in) independently across sources and sums.
/// r[n][i] are M x M Hermitian PSD, h[i] is J x N.
SampledModel sample_model(const std::vector<std::vector<Eigen::MatrixXcd>>& r,
                          const std::vector<Eigen::MatrixXd>& h, std::uint64_t seed);

}  // namespace fastmnmf
