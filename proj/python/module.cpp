// Python bindings for the main operations: STFT, the three estimators,
// Wiener separation, SDR scoring and the synthetic simulator.
#include "fastmnmf/dist.hpp"
#include "fastmnmf/fastmnmf.hpp"
#include "fastmnmf/hermlin.hpp"
#include "fastmnmf/mixsim.hpp"
#include "fastmnmf/sdr.hpp"
#include "fastmnmf/stft.hpp"
#include "fastmnmf/wiener.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace fastmnmf;

namespace {

ObsTensor tensor_from_numpy(const py::array_t<cplx>& arr) {
  if (arr.ndim() != 3) throw std::invalid_argument("expected a complex array of shape (I, J, M)");
  const auto buf = arr.unchecked<3>();
  ObsTensor x(static_cast<int>(buf.shape(0)), static_cast<int>(buf.shape(1)),
              static_cast<int>(buf.shape(2)));
  for (py::ssize_t i = 0; i < buf.shape(0); ++i)
    for (py::ssize_t j = 0; j < buf.shape(1); ++j)
      for (py::ssize_t m = 0; m < buf.shape(2); ++m) x.bins[i](m, j) = buf(i, j, m);
  return x;
}

py::array_t<cplx> tensor_to_numpy(const ObsTensor& x) {
  py::array_t<cplx> arr({x.num_bins(), x.num_frames(), x.num_channels()});
  auto buf = arr.mutable_unchecked<3>();
  for (int i = 0; i < x.num_bins(); ++i)
    for (int j = 0; j < x.num_frames(); ++j)
      for (int m = 0; m < x.num_channels(); ++m) buf(i, j, m) = x.bins[i](m, j);
  return arr;
}

Eigen::MatrixXd signal_from_numpy(const py::array_t<double>& arr) {
  if (arr.ndim() == 1) {
    const auto buf = arr.unchecked<1>();
    Eigen::MatrixXd s(buf.shape(0), 1);
    for (py::ssize_t t = 0; t < buf.shape(0); ++t) s(t, 0) = buf(t);
    return s;
  }
  if (arr.ndim() != 2) throw std::invalid_argument("expected samples of shape (T,) or (T, M)");
  const auto buf = arr.unchecked<2>();
  Eigen::MatrixXd s(buf.shape(0), buf.shape(1));
  for (py::ssize_t t = 0; t < buf.shape(0); ++t)
    for (py::ssize_t m = 0; m < buf.shape(1); ++m) s(t, m) = buf(t, m);
  return s;
}

py::array_t<double> signal_to_numpy(const Eigen::MatrixXd& s) {
  py::array_t<double> arr({static_cast<py::ssize_t>(s.rows()), static_cast<py::ssize_t>(s.cols())});
  auto buf = arr.mutable_unchecked<2>();
  for (Eigen::Index t = 0; t < s.rows(); ++t)
    for (Eigen::Index m = 0; m < s.cols(); ++m) buf(t, m) = s(t, m);
  return arr;
}

StftConfig make_cfg(double sample_rate, int window_len, int hop_len) {
  StftConfig cfg;
  cfg.sample_rate = sample_rate;
  cfg.window_len = window_len;
  cfg.hop_len = hop_len;
  return cfg;
}

py::dict report_to_dict(const FitReport& report) {
  py::dict d;
  d["cost_trace"] = report.cost_trace;
  d["wall_seconds"] = report.wall_seconds;
  d["iterations"] = report.iterations;
  py::dict stages;
  stages["w_update"] = report.stages.w_update;
  stages["mm_update"] = report.stages.mm_update;
  stages["eta"] = report.stages.eta;
  stages["decorrelate"] = report.stages.decorrelate;
  d["stages"] = stages;
  return d;
}

// End-to-end separation of a time-domain mixture; returns per-source
// waveforms at all modeled channels plus the cost trace.
py::dict separate_waveform(const py::array_t<double>& samples, double sample_rate,
                           const std::string& method, const std::vector<int>& partition,
                           int n_sources, int k_bases, int iterations, int window_len,
                           int hop_len, std::uint64_t seed, bool share_spectrograms) {
  const Eigen::MatrixXd signal = signal_from_numpy(samples);
  const StftConfig cfg = make_cfg(sample_rate, window_len, hop_len);
  const ObsTensor x = stft_forward(signal, cfg);
  InitConfig init_cfg;
  init_cfg.num_sources = n_sources;
  init_cfg.k_bases = k_bases;
  const int out_len = static_cast<int>(signal.rows());

  SourceImages images;
  FitReport report;
  if (method == "full" || method == "single") {
    const InitBundle init = init_full(x, init_cfg, seed);
    const FullFit fit = fit_full(x, init, iterations);
    images = wiener_full(x, fit.nmf, fit.spatial);
    report = fit.report;
  } else if (method == "distributed") {
    const BlockLayout layout(partition);
    const InitBundle init = init_distributed(x, layout, init_cfg, seed);
    const DistFit fit = fit_distributed(x, layout, init, iterations, share_spectrograms);
    images = wiener_block(x, fit.models, fit.spatial);
    report = fit.report;
  } else {
    throw std::invalid_argument("method must be full, single or distributed");
  }

  py::list sources;
  for (const auto& wave : reconstruct(images, cfg, out_len))
    sources.append(signal_to_numpy(wave));
  py::dict out;
  out["sources"] = sources;
  out["report"] = report_to_dict(report);
  return out;
}

}  // namespace

PYBIND11_MODULE(_fastmnmf, m) {
  m.doc() = "FastMNMF blind source separation: full-array, single-subarray and "
            "distributed block-diagonal estimators";

  py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefiniteError");
  py::register_exception<ShapeMismatch>(m, "ShapeMismatchError");
  py::register_exception<SingularDemixer>(m, "SingularDemixerError");

  m.def(
      "stft",
      [](const py::array_t<double>& samples, double sample_rate, int window_len, int hop_len) {
        return tensor_to_numpy(
            stft_forward(signal_from_numpy(samples), make_cfg(sample_rate, window_len, hop_len)));
      },
      py::arg("samples"), py::arg("sample_rate"), py::arg("window_len"), py::arg("hop_len"),
      "One-sided STFT; returns a complex array of shape (bins, frames, channels).");

  m.def(
      "istft",
      [](const py::array_t<cplx>& x, double sample_rate, int window_len, int hop_len,
         int out_len) {
        return signal_to_numpy(
            stft_inverse(tensor_from_numpy(x), make_cfg(sample_rate, window_len, hop_len),
                         out_len));
      },
      py::arg("x"), py::arg("sample_rate"), py::arg("window_len"), py::arg("hop_len"),
      py::arg("out_len"), "Overlap-add inverse of stft().");

  m.def(
      "fit_full",
      [](const py::array_t<cplx>& x_arr, int n_sources, int k_bases, int iterations,
         std::uint64_t seed) {
        const ObsTensor x = tensor_from_numpy(x_arr);
        InitConfig cfg;
        cfg.num_sources = n_sources;
        cfg.k_bases = k_bases;
        const InitBundle init = init_full(x, cfg, seed);
        const FullFit fit = fit_full(x, init, iterations);
        py::dict d = report_to_dict(fit.report);
        return d;
      },
      py::arg("x"), py::arg("n_sources"), py::arg("k_bases") = 16, py::arg("iterations") = 200,
      py::arg("seed") = 0, "Full-array estimation; returns the fit report.");

  m.def(
      "fit_distributed",
      [](const py::array_t<cplx>& x_arr, const std::vector<int>& partition, int n_sources,
         int k_bases, int iterations, std::uint64_t seed, bool share_spectrograms) {
        const ObsTensor x = tensor_from_numpy(x_arr);
        const BlockLayout layout(partition);
        InitConfig cfg;
        cfg.num_sources = n_sources;
        cfg.k_bases = k_bases;
        const InitBundle init = init_distributed(x, layout, cfg, seed);
        const DistFit fit =
            fit_distributed(x, layout, init, iterations, share_spectrograms);
        return report_to_dict(fit.report);
      },
      py::arg("x"), py::arg("partition"), py::arg("n_sources"), py::arg("k_bases") = 16,
      py::arg("iterations") = 200, py::arg("seed") = 0, py::arg("share_spectrograms") = true,
      "Distributed estimation with block-diagonal spatial covariances.");

  m.def("separate", &separate_waveform, py::arg("samples"), py::arg("sample_rate"),
        py::arg("method"), py::arg("partition") = std::vector<int>{},
        py::arg("n_sources") = 3, py::arg("k_bases") = 16, py::arg("iterations") = 200,
        py::arg("window_len") = 4096, py::arg("hop_len") = 1024, py::arg("seed") = 0,
        py::arg("share_spectrograms") = true,
        "End-to-end separation of a (T, M) mixture; returns per-source waveforms.");

  m.def(
      "sdr",
      [](const py::array_t<double>& reference, const py::array_t<double>& estimate,
         int filter_len) {
        const Eigen::MatrixXd r = signal_from_numpy(reference);
        const Eigen::MatrixXd e = signal_from_numpy(estimate);
        return sdr(r.col(0), e.col(0), filter_len);
      },
      py::arg("reference"), py::arg("estimate"), py::arg("filter_len") = kSdrFilterLen,
      "SDR in dB with an FIR allowed-distortion filter.");

  m.def(
      "sdr_improvement",
      [](const py::array_t<double>& mixture, const std::vector<py::array_t<double>>& refs,
         const std::vector<py::array_t<double>>& ests, int filter_len) {
        std::vector<Eigen::VectorXd> r, e;
        for (const auto& a : refs) r.push_back(signal_from_numpy(a).col(0));
        for (const auto& a : ests) e.push_back(signal_from_numpy(a).col(0));
        const SdrReport rep =
            sdr_improvement(signal_from_numpy(mixture).col(0), r, e, filter_len);
        py::dict d;
        d["sdr_db"] = rep.sdr_db;
        d["baseline_db"] = rep.baseline_db;
        d["improvement_db"] = rep.improvement_db;
        d["permutation"] = rep.permutation;
        d["mean_improvement_db"] = rep.mean_improvement_db;
        return d;
      },
      py::arg("mixture"), py::arg("references"), py::arg("estimates"),
      py::arg("filter_len") = kSdrFilterLen,
      "Per-source SDR improvement with max-sum permutation.");

  m.def(
      "is_jointly_diagonalizable",
      [](const std::vector<py::array_t<cplx>>& mats, double tol) {
        std::vector<Eigen::MatrixXcd> family;
        for (const auto& arr : mats) {
          const auto buf = arr.unchecked<2>();
          Eigen::MatrixXcd m(buf.shape(0), buf.shape(1));
          for (py::ssize_t r = 0; r < buf.shape(0); ++r)
            for (py::ssize_t c = 0; c < buf.shape(1); ++c) m(r, c) = buf(r, c);
          family.push_back(std::move(m));
        }
        return is_jointly_diagonalizable(family, tol);
      },
      py::arg("matrices"), py::arg("tol") = 1e-8,
      "Whitened-commutator test for a Hermitian PSD family with PD sum.");

  m.def(
      "simulate",
      [](int n_sources, double sample_rate, double duration_s, std::uint64_t seed) {
        const Scenario s = reference_scenario(n_sources, sample_rate, duration_s);
        const GroundTruth gt = simulate(s, seed);
        py::dict d;
        d["mixture"] = signal_to_numpy(gt.mixture);
        py::list images;
        for (const auto& img : gt.images) images.append(signal_to_numpy(img));
        d["images"] = images;
        d["reference_mic"] = gt.reference_mic;
        d["partition"] = s.layout().sizes;
        return d;
      },
      py::arg("n_sources") = 3, py::arg("sample_rate") = 16000.0, py::arg("duration_s") = 10.0,
      py::arg("seed") = 0,
      "Synthetic anechoic scene with the fixed three-subarray geometry.");
}
