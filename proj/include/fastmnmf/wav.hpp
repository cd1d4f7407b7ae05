// Multichannel RIFF/WAVE reader and writer (PCM16 and float32, little endian).
#pragma once

#include "fastmnmf/types.hpp"

#include <string>

namespace fastmnmf {

struct WavData {
  double sample_rate = 0.0;
  Eigen::MatrixXd samples;  // frames x channels, in [-1, 1] for PCM input
};

enum class WavFormat { Pcm16, Float32 };

WavData read_wav(const std::string& path);
void write_wav(const std::string& path, const Eigen::MatrixXd& samples, double sample_rate,
               WavFormat format = WavFormat::Float32);

}  // namespace fastmnmf
