// Command-line front end: simulate, separate, evaluate, benchmark.
#include "fastmnmf/bench.hpp"
#include "fastmnmf/dist.hpp"
#include "fastmnmf/fastmnmf.hpp"
#include "fastmnmf/io.hpp"
#include "fastmnmf/mixsim.hpp"
#include "fastmnmf/sdr.hpp"
#include "fastmnmf/stft.hpp"
#include "fastmnmf/wav.hpp"
#include "fastmnmf/wiener.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fastmnmf;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitShape = 4;
constexpr int kExitNoTruth = 5;

struct RunConfig {
  std::string method = "distributed";  // full | single | distributed
  std::vector<int> partition;
  int n_sources = 3;
  int k_bases = 16;
  int iterations = 200;
  double window_ms = 256.0;
  double hop_ms = 64.0;
  double floor = kFloor;
  std::uint64_t seed = 0;
  bool share_spectrograms = true;
  int reference_mic = 0;
  int threads = 1;
  int eval_every = 0;

  void validate(int channels) const {
    if (method != "full" && method != "single" && method != "distributed")
      throw std::invalid_argument("method must be full, single or distributed");
    if (method == "distributed" && partition.empty())
      throw std::invalid_argument("distributed method requires --partition");
    if (n_sources < 1) throw std::invalid_argument("n-sources must be >= 1");
    if (iterations < 0) throw std::invalid_argument("iters must be >= 0");
    if (!(floor > 0)) throw std::invalid_argument("floor must be positive");
    if (!partition.empty()) {
      int total = 0;
      for (int s : partition) {
        if (s <= 0) throw std::invalid_argument("partition entries must be positive");
        total += s;
      }
      if (method != "single" && total != channels)
        throw ShapeMismatch("partition does not match the channel count");
      if (method == "single" && partition[0] > channels)
        throw ShapeMismatch("partition does not match the channel count");
    }
  }
};

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file " + path);
  json j;
  f >> j;
  cfg.method = j.value("method", cfg.method);
  if (j.contains("partition")) cfg.partition = j["partition"].get<std::vector<int>>();
  cfg.n_sources = j.value("n_sources", cfg.n_sources);
  cfg.k_bases = j.value("k_bases", cfg.k_bases);
  cfg.iterations = j.value("iterations", cfg.iterations);
  cfg.window_ms = j.value("window_ms", cfg.window_ms);
  cfg.hop_ms = j.value("hop_ms", cfg.hop_ms);
  cfg.floor = j.value("floor", cfg.floor);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.share_spectrograms = j.value("share_spectrograms", cfg.share_spectrograms);
  cfg.reference_mic = j.value("reference_mic", cfg.reference_mic);
  cfg.eval_every = j.value("eval_every", cfg.eval_every);
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                 std::uint64_t seed) {
  Scenario scenario;
  try {
    std::ifstream f(scenario_path);
    if (!f) {
      std::cerr << "simulate: cannot open scenario " << scenario_path << "\n";
      return kExitIo;
    }
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    scenario = scenario_from_json(text);
  } catch (const std::exception& e) {
    std::cerr << "simulate: invalid scenario: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    fs::create_directories(out_dir);
    const GroundTruth gt = simulate(scenario, seed);
    const fs::path dir(out_dir);
    write_wav((dir / "mixture.wav").string(), gt.mixture, scenario.sample_rate);
    json manifest;
    manifest["seed"] = seed;
    manifest["sample_rate"] = scenario.sample_rate;
    manifest["reference_mic"] = scenario.reference_mic;
    manifest["partition"] = scenario.layout().sizes;
    manifest["mixture"] = "mixture.wav";
    manifest["scenario"] = json::parse(scenario_to_json(scenario));
    for (size_t n = 0; n < gt.images.size(); ++n) {
      const std::string name = "image_src" + std::to_string(n) + ".wav";
      write_wav((dir / name).string(), gt.images[n], scenario.sample_rate);
      manifest["images"].push_back(name);
    }
    std::ofstream mf(dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
    std::cout << "simulate: wrote " << gt.images.size() << " sources, " << gt.mixture.cols()
              << " channels to " << out_dir << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "simulate: " << e.what() << "\n";
    return kExitIo;
  }
}

int cmd_separate(const RunConfig& cfg, const std::string& mixture_path,
                 const std::string& out_dir, const std::string& manifest_path,
                 bool dump_init) {
  WavData wav;
  try {
    wav = read_wav(mixture_path);
  } catch (const std::exception& e) {
    std::cerr << "separate: " << e.what() << "\n";
    return kExitIo;
  }
  const int channels = static_cast<int>(wav.samples.cols());
  try {
    cfg.validate(channels);
  } catch (const ShapeMismatch& e) {
    std::cerr << "separate: " << e.what() << "\n";
    return kExitShape;
  } catch (const std::exception& e) {
    std::cerr << "separate: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const StftConfig stft_cfg = StftConfig::from_ms(wav.sample_rate, cfg.window_ms, cfg.hop_ms);
    const int out_len = static_cast<int>(wav.samples.rows());

    InitConfig init_cfg;
    init_cfg.num_sources = cfg.n_sources;
    init_cfg.k_bases = cfg.k_bases;

    FitOptions options;
    options.floor = cfg.floor;

    // optional SDR-vs-time tracing against a simulation manifest
    std::vector<Eigen::VectorXd> truth_refs;
    Eigen::VectorXd mixture_ref;
    std::vector<TraceRow> trace_rows;
    const ObsTensor* traced_x = nullptr;
    int channel_offset = 0;

    auto make_scorer = [&](const ObsTensor& x) {
      traced_x = &x;
      return [&](const FitSnapshot& snap) {
        BlockSpatialModel spatial;
        spatial.layout = *snap.layout;
        spatial.W = *snap.w_blocks;
        spatial.Lambda = *snap.lambda;
        std::vector<NmfModel> models;
        for (const auto* m : snap.models) models.push_back(*m);
        const SourceImages snap_images = wiener_block(*traced_x, models, spatial, cfg.floor);
        const auto waves = reconstruct(snap_images, stft_cfg, out_len);
        std::vector<Eigen::VectorXd> est_refs;
        const int local_ref =
            std::min<int>(std::max(cfg.reference_mic - channel_offset, 0),
                          static_cast<int>(waves[0].cols()) - 1);
        for (const auto& w : waves) est_refs.push_back(w.col(local_ref));
        TraceRow row;
        row.iteration = snap.iteration;
        row.seconds = snap.elapsed_seconds;
        row.cost = snap.cost;
        row.mean_sdr_improvement =
            sdr_improvement(mixture_ref, truth_refs, est_refs).mean_improvement_db;
        trace_rows.push_back(row);
      };
    };

    if (cfg.eval_every > 0) {
      if (manifest_path.empty()) {
        std::cerr << "separate: --eval-every needs --manifest for the ground truth\n";
        return kExitNoTruth;
      }
      std::ifstream mf(manifest_path);
      if (!mf) {
        std::cerr << "separate: cannot open manifest " << manifest_path << "\n";
        return kExitNoTruth;
      }
      json manifest;
      mf >> manifest;
      const fs::path base = fs::path(manifest_path).parent_path();
      for (const auto& name : manifest["images"]) {
        const WavData img = read_wav((base / name.get<std::string>()).string());
        truth_refs.push_back(img.samples.col(cfg.reference_mic));
      }
      mixture_ref = wav.samples.col(cfg.reference_mic);
      options.eval_every = cfg.eval_every;
    }

    ModelDump dump;
    dump.config = {cfg.n_sources,  cfg.k_bases,         cfg.iterations,   cfg.floor,
                   cfg.seed,       wav.sample_rate,     stft_cfg.window_len,
                   stft_cfg.hop_len};
    SourceImages images;
    FitReport report;
    std::vector<Eigen::MatrixXd> waves;

    if (cfg.method == "single") {
      Eigen::MatrixXd samples = wav.samples;
      if (!cfg.partition.empty() && cfg.partition[0] < channels)
        samples = wav.samples.leftCols(cfg.partition[0]);
      const ObsTensor x = stft_forward(samples, stft_cfg);
      const InitBundle init = init_full(x, init_cfg, cfg.seed);
      if (dump_init) dump_init_json((dir / "init.json").string(), init);
      if (options.eval_every > 0) options.on_eval = make_scorer(x);
      const FullFit fit = fit_single(x, init, cfg.iterations, options);
      images = wiener_full(x, fit.nmf, fit.spatial, cfg.floor);
      report = fit.report;
      dump.layout = BlockLayout::full(static_cast<int>(samples.cols()));
      dump.shared = true;
      dump.models = {fit.nmf};
      dump.lambda = fit.spatial.Lambda;
      dump.w = {fit.spatial.W};
      waves = reconstruct(images, stft_cfg, out_len);
    } else if (cfg.method == "full") {
      const ObsTensor x = stft_forward(wav.samples, stft_cfg);
      const InitBundle init = init_full(x, init_cfg, cfg.seed);
      if (dump_init) dump_init_json((dir / "init.json").string(), init);
      if (options.eval_every > 0) options.on_eval = make_scorer(x);
      const FullFit fit = fit_full(x, init, cfg.iterations, options);
      images = wiener_full(x, fit.nmf, fit.spatial, cfg.floor);
      report = fit.report;
      dump.layout = BlockLayout::full(channels);
      dump.shared = true;
      dump.models = {fit.nmf};
      dump.lambda = fit.spatial.Lambda;
      dump.w = {fit.spatial.W};
      waves = reconstruct(images, stft_cfg, out_len);
    } else {
      const BlockLayout layout(cfg.partition);
      const ObsTensor x = stft_forward(wav.samples, stft_cfg);
      const InitBundle init = init_distributed(x, layout, init_cfg, cfg.seed);
      if (dump_init) dump_init_json((dir / "init.json").string(), init);
      if (options.eval_every > 0) options.on_eval = make_scorer(x);
      const DistFit fit =
          fit_distributed(x, layout, init, cfg.iterations, cfg.share_spectrograms, options);
      images = wiener_block(x, fit.models, fit.spatial, cfg.floor);
      report = fit.report;
      dump.layout = layout;
      dump.shared = fit.shared;
      dump.models = fit.models;
      dump.lambda = fit.spatial.Lambda;
      dump.w = fit.spatial.W;
      waves = reconstruct(images, stft_cfg, out_len);
    }

    const std::string stem = fs::path(mixture_path).stem().string();
    json sep_report;
    sep_report["method"] = cfg.method;
    sep_report["seed"] = cfg.seed;
    sep_report["channel_offset"] = channel_offset;
    sep_report["channels"] = waves.empty() ? 0 : static_cast<int>(waves[0].cols());
    sep_report["reference_mic"] = cfg.reference_mic;
    for (size_t n = 0; n < waves.size(); ++n) {
      const std::string name = stem + "_src" + std::to_string(n) + ".wav";
      write_wav((dir / name).string(), waves[n], wav.sample_rate);
      sep_report["sources"].push_back(name);
    }
    save_model((dir / "model.bin").string(), dump);
    dump_model_json((dir / "model.json").string(), dump);
    write_trace_csv((dir / "trace.csv").string(), report);
    if (!trace_rows.empty())
      write_eval_trace_csv((dir / "sdr_trace.csv").string(), trace_rows);
    std::ofstream rf(dir / "separation.json");
    rf << sep_report.dump(2) << "\n";
    std::cout << "separate: " << waves.size() << " sources in " << report.iterations
              << " iterations (" << report.total_seconds() << " s estimation)\n";
    return kExitOk;
  } catch (const ShapeMismatch& e) {
    std::cerr << "separate: " << e.what() << "\n";
    return kExitShape;
  } catch (const std::exception& e) {
    std::cerr << "separate: " << e.what() << "\n";
    return kExitIo;
  }
}

int cmd_evaluate(const std::string& manifest_path, const std::string& separated_dir,
                 int filter_len, int reference_override) {
  json manifest;
  fs::path base;
  try {
    std::ifstream mf(manifest_path);
    if (!mf) {
      std::cerr << "evaluate: cannot open manifest " << manifest_path << "\n";
      return kExitNoTruth;
    }
    mf >> manifest;
    base = fs::path(manifest_path).parent_path();
    if (!manifest.contains("images") || manifest["images"].empty()) {
      std::cerr << "evaluate: manifest lists no ground-truth images\n";
      return kExitNoTruth;
    }
  } catch (const std::exception& e) {
    std::cerr << "evaluate: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const int reference_mic =
        reference_override >= 0 ? reference_override : manifest.value("reference_mic", 0);
    std::vector<Eigen::VectorXd> truth_refs;
    for (const auto& name : manifest["images"]) {
      const fs::path p = base / name.get<std::string>();
      if (!fs::exists(p)) {
        std::cerr << "evaluate: missing ground-truth image " << p << "\n";
        return kExitNoTruth;
      }
      truth_refs.push_back(read_wav(p.string()).samples.col(reference_mic));
    }
    const WavData mix = read_wav((base / manifest["mixture"].get<std::string>()).string());
    const Eigen::VectorXd mixture_ref = mix.samples.col(reference_mic);

    // separated sources: use the separation report when present, else *_src*.wav
    std::vector<fs::path> est_paths;
    int local_ref = reference_mic;
    std::string method = "unknown";
    const fs::path sep_report_path = fs::path(separated_dir) / "separation.json";
    if (fs::exists(sep_report_path)) {
      std::ifstream rf(sep_report_path);
      json rep;
      rf >> rep;
      method = rep.value("method", method);
      for (const auto& name : rep["sources"])
        est_paths.push_back(fs::path(separated_dir) / name.get<std::string>());
      const int offset = rep.value("channel_offset", 0);
      const int covered = rep.value("channels", 0);
      if (reference_mic < offset || (covered > 0 && reference_mic >= offset + covered)) {
        std::cerr << "evaluate: reference mic " << reference_mic
                  << " not covered by the separated channels; using local channel 0\n";
        local_ref = 0;
      } else {
        local_ref = reference_mic - offset;
      }
    } else {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(separated_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.find("_src") != std::string::npos && entry.path().extension() == ".wav")
          found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      est_paths = std::move(found);
    }
    if (est_paths.size() != truth_refs.size()) {
      std::cerr << "evaluate: found " << est_paths.size() << " separated sources, expected "
                << truth_refs.size() << "\n";
      return kExitShape;
    }

    std::vector<Eigen::VectorXd> est_refs;
    for (const auto& p : est_paths) {
      const WavData est = read_wav(p.string());
      const int col = std::min<int>(local_ref, static_cast<int>(est.samples.cols()) - 1);
      est_refs.push_back(est.samples.col(col));
    }

    const SdrReport rep = sdr_improvement(mixture_ref, truth_refs, est_refs, filter_len);
    const std::uint64_t seed = manifest.value("seed", 0);
    std::vector<SdrCsvRow> rows;
    for (size_t n = 0; n < truth_refs.size(); ++n)
      rows.push_back({method, seed, static_cast<int>(n), rep.sdr_db[n], rep.improvement_db[n],
                      rep.permutation[n]});
    write_sdr_csv((fs::path(separated_dir) / "sdr_report.csv").string(), rows);

    json summary;
    summary["method"] = method;
    summary["mean_improvement_db"] = rep.mean_improvement_db;
    summary["per_source_improvement_db"] = rep.improvement_db;
    summary["per_source_sdr_db"] = rep.sdr_db;
    summary["baseline_sdr_db"] = rep.baseline_db;
    summary["permutation"] = rep.permutation;
    summary["reference_mic"] = reference_mic;
    summary["filter_len"] = filter_len;
    std::ofstream sf(fs::path(separated_dir) / "sdr_summary.json");
    sf << summary.dump(2) << "\n";
    std::cout << "evaluate: mean SDR improvement " << rep.mean_improvement_db << " dB\n";
    return kExitOk;
  } catch (const ShapeMismatch& e) {
    std::cerr << "evaluate: " << e.what() << "\n";
    return kExitShape;
  } catch (const std::exception& e) {
    std::cerr << "evaluate: " << e.what() << "\n";
    return kExitIo;
  }
}

int cmd_benchmark(const BenchDims& dims, int iters, int repeats, std::uint64_t seed,
                  bool scaling, const std::string& out_dir, int threads) {
  try {
    if (threads != 1)
      std::cout << "benchmark: estimators are single-threaded; running serially\n";
    for (int s : dims.partition)
      if (s <= 0) throw std::invalid_argument("field partition: entries must be positive");
    if (repeats < 1) throw std::invalid_argument("field repeats: must be >= 1");
    if (iters < 1) throw std::invalid_argument("field iters: must be >= 1");
    if (dims.num_bins < 1) throw std::invalid_argument("field bins: must be >= 1");
    if (dims.num_frames < 1) throw std::invalid_argument("field frames: must be >= 1");

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const auto results = bench_methods(dims, iters, repeats, seed);

    std::ofstream csv(dir / "benchmark.csv");
    csv << "method,channels,iterations,repeats,total_mean_s,total_se_s,total_min_s,"
           "total_max_s,w_update_s,mm_update_s,eta_s,decorrelate_s\n";
    for (const auto& r : results)
      csv << r.method << ',' << r.dims.num_channels() << ',' << r.iterations << ','
          << r.repeats << ',' << r.total_mean << ',' << r.total_se << ',' << r.total_min << ','
          << r.total_max << ',' << r.stages.w_update << ',' << r.stages.mm_update << ','
          << r.stages.eta << ',' << r.stages.decorrelate << '\n';

    json j;
    j["environment"]["compiler"] = __VERSION__;
#ifdef NDEBUG
    j["environment"]["build"] = "release";
#else
    j["environment"]["build"] = "debug";
#endif
    {
      std::ifstream cpuinfo("/proc/cpuinfo");
      std::string line;
      while (std::getline(cpuinfo, line))
        if (line.rfind("model name", 0) == 0) {
          j["environment"]["cpu"] = line.substr(line.find(':') + 2);
          break;
        }
    }
    j["dims"] = {{"num_bins", dims.num_bins},
                 {"num_frames", dims.num_frames},
                 {"n_sources", dims.num_sources},
                 {"k_bases", dims.k_bases},
                 {"partition", dims.partition}};
    j["iterations"] = iters;
    j["repeats"] = repeats;
    j["seed"] = seed;
    for (const auto& r : results)
      j["methods"][r.method] = {{"total_mean_s", r.total_mean},
                                {"total_se_s", r.total_se},
                                {"total_min_s", r.total_min},
                                {"total_max_s", r.total_max},
                                {"w_update_s", r.stages.w_update},
                                {"mm_update_s", r.stages.mm_update},
                                {"eta_s", r.stages.eta},
                                {"decorrelate_s", r.stages.decorrelate}};
    std::cout << "benchmark: single " << results[0].total_mean << " s, distributed "
              << results[1].total_mean << " s, full " << results[2].total_mean << " s\n";

    if (scaling) {
      const ScalingFit full_fit =
          bench_scaling_full({4, 8, 16, 32}, dims.num_bins, dims.num_frames, dims.num_sources,
                             dims.k_bases, std::max(3, iters / 4), seed);
      const ScalingFit dist_fit =
          bench_scaling_dist({1, 2, 3, 4, 6, 8}, 4, dims.num_bins, dims.num_frames,
                             dims.num_sources, dims.k_bases, std::max(3, iters / 4), seed);
      j["scaling"]["full_slope_vs_m"] = full_fit.slope;
      j["scaling"]["dist_slope_vs_l"] = dist_fit.slope;
      for (const auto& p : full_fit.points)
        j["scaling"]["full_points"].push_back({p.size, p.w_stage_seconds});
      for (const auto& p : dist_fit.points)
        j["scaling"]["dist_points"].push_back({p.size, p.w_stage_seconds});
      std::cout << "benchmark: W-stage slope vs M " << full_fit.slope << ", vs L "
                << dist_fit.slope << "\n";
    }

    std::ofstream jf(dir / "benchmark.json");
    jf << j.dump(2) << "\n";
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "benchmark: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "benchmark: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FastMNMF blind source separation toolkit"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Render a synthetic scene to WAV files");
  std::string scenario_path, sim_out = "out";
  std::uint64_t sim_seed = 0;
  sim->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  sim->add_option("-o,--out", sim_out, "Output directory");
  sim->add_option("--seed", sim_seed, "Random seed");

  auto* sep = app.add_subcommand("separate", "Separate a multichannel mixture");
  RunConfig cfg;
  std::string mixture_path, sep_out = "out", config_path, sep_manifest;
  sep->add_option("mixture", mixture_path, "Multichannel mixture WAV")->required();
  sep->add_option("-o,--out", sep_out, "Output directory");
  sep->add_option("-c,--config", config_path, "JSON config file (flags override)");
  sep->add_option("--method", cfg.method, "full | single | distributed");
  sep->add_option("--partition", cfg.partition, "Subarray sizes, e.g. --partition 4 4 4");
  sep->add_option("--n-sources", cfg.n_sources, "Number of sources");
  sep->add_option("--k-bases", cfg.k_bases, "NMF bases per source");
  sep->add_option("--iters", cfg.iterations, "Estimation iterations");
  sep->add_option("--window-ms", cfg.window_ms, "STFT window in ms");
  sep->add_option("--hop-ms", cfg.hop_ms, "STFT hop in ms");
  sep->add_option("--floor", cfg.floor, "Numerical floor");
  sep->add_option("--seed", cfg.seed, "Random seed");
  sep->add_option("--share-spectrograms", cfg.share_spectrograms,
                  "Share NMF spectrograms across subarrays (distributed)");
  sep->add_option("--reference-mic", cfg.reference_mic, "Reference microphone index");
  sep->add_option("--threads", cfg.threads, "Worker threads (1 = benchmark-grade serial)");
  sep->add_option("--eval-every", cfg.eval_every,
                  "Trace SDR improvement every N iterations (needs --manifest)");
  sep->add_option("--manifest", sep_manifest, "Simulation manifest for SDR tracing");
  bool sep_dump_init = false;
  sep->add_flag("--dump-init", sep_dump_init, "Also write the initialization bundle as JSON");

  auto* eval = app.add_subcommand("evaluate", "Score separated sources against ground truth");
  std::string eval_manifest, eval_dir;
  int filter_len = kSdrFilterLen;
  int eval_ref = -1;
  eval->add_option("manifest", eval_manifest, "Simulation manifest JSON")->required();
  eval->add_option("separated", eval_dir, "Directory with separated sources")->required();
  eval->add_option("--filter-len", filter_len, "Distortion filter taps");
  eval->add_option("--reference-mic", eval_ref, "Override the manifest reference mic");

  auto* bench = app.add_subcommand("benchmark", "Time the estimators on matched data");
  BenchDims dims;
  dims.partition.clear();
  int bench_iters = 200, repeats = 3, bench_threads = 1;
  std::uint64_t bench_seed = 0;
  bool scaling = false, long_mode = false;
  std::string bench_out = "bench";
  bench->add_option("--bins", dims.num_bins, "Frequency bins");
  bench->add_option("--frames", dims.num_frames, "Time frames");
  bench->add_option("--n-sources", dims.num_sources, "Number of sources");
  bench->add_option("--k-bases", dims.k_bases, "NMF bases");
  bench->add_option("--partition", dims.partition, "Subarray sizes");
  bench->add_option("--iters", bench_iters, "Iterations per run");
  bench->add_option("--repeats", repeats, "Timed repeats per method");
  bench->add_option("--seed", bench_seed, "Random seed");
  bench->add_option("--threads", bench_threads, "Worker threads (must be 1 for reporting)");
  bench->add_flag("--scaling", scaling, "Also fit W-stage scaling slopes");
  bench->add_flag("--long", long_mode, "Use the large reference dimensions");
  bench->add_option("-o,--out", bench_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (sim->parsed()) return cmd_simulate(scenario_path, sim_out, sim_seed);
  if (sep->parsed()) {
    if (!config_path.empty()) {
      try {
        RunConfig merged;
        load_config_file(config_path, merged);
        if (sep->count("--method")) merged.method = cfg.method;
        if (sep->count("--partition")) merged.partition = cfg.partition;
        if (sep->count("--n-sources")) merged.n_sources = cfg.n_sources;
        if (sep->count("--k-bases")) merged.k_bases = cfg.k_bases;
        if (sep->count("--iters")) merged.iterations = cfg.iterations;
        if (sep->count("--window-ms")) merged.window_ms = cfg.window_ms;
        if (sep->count("--hop-ms")) merged.hop_ms = cfg.hop_ms;
        if (sep->count("--floor")) merged.floor = cfg.floor;
        if (sep->count("--seed")) merged.seed = cfg.seed;
        if (sep->count("--share-spectrograms"))
          merged.share_spectrograms = cfg.share_spectrograms;
        if (sep->count("--reference-mic")) merged.reference_mic = cfg.reference_mic;
        if (sep->count("--eval-every")) merged.eval_every = cfg.eval_every;
        if (sep->count("--threads")) merged.threads = cfg.threads;
        cfg = merged;
      } catch (const std::exception& e) {
        std::cerr << "separate: " << e.what() << "\n";
        return kExitConfig;
      }
    }
    if (cfg.threads != 1)
      std::cout << "separate: estimators are single-threaded; running serially\n";
    return cmd_separate(cfg, mixture_path, sep_out, sep_manifest, sep_dump_init);
  }
  if (eval->parsed()) return cmd_evaluate(eval_manifest, eval_dir, filter_len, eval_ref);
  if (bench->parsed()) {
    if (long_mode) {
      dims.num_bins = 2049;
      dims.num_frames = 2400;
    }
    if (dims.partition.empty()) dims.partition = {4, 4, 4};
    return cmd_benchmark(dims, bench_iters, repeats, bench_seed, scaling, bench_out,
                         bench_threads);
  }
  return kExitConfig;
}
