// Model container (versioned binary + JSON debug dump), CSV traces and reports.
#pragma once

#include "fastmnmf/init.hpp"
#include "fastmnmf/model.hpp"
#include "fastmnmf/sdr.hpp"

#include <string>

namespace fastmnmf {

inline constexpr std::uint32_t kModelFormatVersion = 2;  // v2 added layout and share mode

struct ModelConfig {
  int n_sources = 0, k_bases = 0, iterations = 0;
  double floor = kFloor;
  std::uint64_t seed = 0;
  double sample_rate = 0;
  int window_len = 0, hop_len = 0;
};

struct ModelDump {
  ModelConfig config;
  BlockLayout layout;
  bool shared = true;
  std::vector<NmfModel> models;                  // one entry when shared
  std::vector<Eigen::MatrixXd> lambda;           // per bin: N x M
  std::vector<std::vector<Eigen::MatrixXcd>> w;  // [block][bin]
};

void save_model(const std::string& path, const ModelDump& dump);
ModelDump load_model(const std::string& path);
void dump_model_json(const std::string& path, const ModelDump& dump);

/// Audit dump of an initialization bundle: masks, initial spectrograms and
/// the spatial starting point.
void dump_init_json(const std::string& path, const InitBundle& init);

/// Columns: iteration, cost, wall_seconds (row 0 is the initial cost).
void write_trace_csv(const std::string& path, const FitReport& report);

/// Columns: iteration, cumulative_seconds, cost, mean_sdr_improvement.
void write_eval_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);

struct SdrCsvRow {
  std::string method;
  std::uint64_t seed = 0;
  int source = 0;
  double sdr_db = 0;
  double improvement_db = 0;
  int permutation = 0;
};

void write_sdr_csv(const std::string& path, const std::vector<SdrCsvRow>& rows);

/// JSON with per-method mean, median and standard error over trials.
void write_sdr_summary_json(const std::string& path,
                            const std::vector<std::pair<std::string, std::vector<double>>>&
                                per_method_improvements);

}  // namespace fastmnmf
