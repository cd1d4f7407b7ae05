#include "fastmnmf/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace fastmnmf {

namespace {

template <typename T>
void put(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_wav: cannot open " + path);

  char tag[4];
  f.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) throw std::runtime_error("read_wav: not a RIFF file");
  get<std::uint32_t>(f);  // riff size
  f.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) throw std::runtime_error("read_wav: not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<char> data;
  while (f.read(tag, 4)) {
    const std::uint32_t size = get<std::uint32_t>(f);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = get<std::uint16_t>(f);
      channels = get<std::uint16_t>(f);
      rate = get<std::uint32_t>(f);
      get<std::uint32_t>(f);  // byte rate
      get<std::uint16_t>(f);  // block align
      bits = get<std::uint16_t>(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      f.read(data.data(), size);
      break;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (channels == 0 || rate == 0 || data.empty())
    throw std::runtime_error("read_wav: missing fmt or data chunk in " + path);

  WavData out;
  out.sample_rate = rate;
  if (format == 1 && bits == 16) {
    const auto frames = data.size() / (2 * channels);
    out.samples.resize(frames, channels);
    const std::int16_t* p = reinterpret_cast<const std::int16_t*>(data.data());
    for (size_t t = 0; t < frames; ++t)
      for (int m = 0; m < channels; ++m)
        out.samples(t, m) = static_cast<double>(p[t * channels + m]) / 32768.0;
  } else if (format == 3 && bits == 32) {
    const auto frames = data.size() / (4 * channels);
    out.samples.resize(frames, channels);
    const float* p = reinterpret_cast<const float*>(data.data());
    for (size_t t = 0; t < frames; ++t)
      for (int m = 0; m < channels; ++m) out.samples(t, m) = p[t * channels + m];
  } else {
    throw std::runtime_error("read_wav: unsupported format (need PCM16 or float32)");
  }
  return out;
}

void write_wav(const std::string& path, const Eigen::MatrixXd& samples, double sample_rate,
               WavFormat format) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_wav: cannot open " + path);

  const std::uint16_t channels = static_cast<std::uint16_t>(samples.cols());
  const std::uint32_t frames = static_cast<std::uint32_t>(samples.rows());
  const bool pcm = format == WavFormat::Pcm16;
  const std::uint16_t bytes_per_sample = pcm ? 2 : 4;
  const std::uint32_t data_size = frames * channels * bytes_per_sample;

  f.write("RIFF", 4);
  put<std::uint32_t>(f, 36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put<std::uint32_t>(f, 16);
  put<std::uint16_t>(f, pcm ? 1 : 3);
  put<std::uint16_t>(f, channels);
  put<std::uint32_t>(f, static_cast<std::uint32_t>(sample_rate));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(sample_rate) * channels * bytes_per_sample);
  put<std::uint16_t>(f, static_cast<std::uint16_t>(channels * bytes_per_sample));
  put<std::uint16_t>(f, static_cast<std::uint16_t>(8 * bytes_per_sample));
  f.write("data", 4);
  put<std::uint32_t>(f, data_size);

  for (std::uint32_t t = 0; t < frames; ++t) {
    for (int m = 0; m < channels; ++m) {
      if (pcm) {
        double v = std::max(-1.0, std::min(1.0, samples(t, m)));
        put<std::int16_t>(f, static_cast<std::int16_t>(std::lround(v * 32767.0)));
      } else {
        put<float>(f, static_cast<float>(samples(t, m)));
      }
    }
  }
}

}  // namespace fastmnmf
