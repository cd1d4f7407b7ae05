#include "fastmnmf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>

namespace fastmnmf {

namespace {

constexpr char kMagic[4] = {'F', 'M', 'N', 'M'};

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

void put_real(std::ofstream& f, const Eigen::MatrixXd& m) {
  f.write(reinterpret_cast<const char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void get_real(std::ifstream& f, Eigen::MatrixXd& m) {
  f.read(reinterpret_cast<char*>(m.data()),
         static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void put_cplx(std::ofstream& f, const Eigen::MatrixXcd& m) {
  f.write(reinterpret_cast<const char*>(m.data()),
          static_cast<std::streamsize>(sizeof(cplx) * m.size()));
}

void get_cplx(std::ifstream& f, Eigen::MatrixXcd& m) {
  f.read(reinterpret_cast<char*>(m.data()),
         static_cast<std::streamsize>(sizeof(cplx) * m.size()));
}

}  // namespace

void save_model(const std::string& path, const ModelDump& dump) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_model: cannot open " + path);
  const int num_bins = static_cast<int>(dump.lambda.size());
  const int n_src = num_bins ? static_cast<int>(dump.lambda[0].rows()) : 0;
  const int j_frames = dump.models.empty() ? 0 : dump.models[0].num_frames();

  f.write(kMagic, 4);
  put<std::uint32_t>(f, kModelFormatVersion);
  put<std::uint32_t>(f, static_cast<std::uint32_t>(num_bins));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(j_frames));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(dump.layout.total));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(n_src));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(dump.config.k_bases));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(dump.layout.num_blocks()));
  for (int s : dump.layout.sizes) put<std::uint32_t>(f, static_cast<std::uint32_t>(s));
  put<std::uint8_t>(f, dump.shared ? 1 : 0);
  put<double>(f, dump.config.floor);
  put<std::uint64_t>(f, dump.config.seed);
  put<double>(f, dump.config.sample_rate);
  put<std::uint32_t>(f, static_cast<std::uint32_t>(dump.config.window_len));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(dump.config.hop_len));
  put<std::uint32_t>(f, static_cast<std::uint32_t>(dump.config.iterations));

  put<std::uint32_t>(f, static_cast<std::uint32_t>(dump.models.size()));
  for (const auto& model : dump.models) {
    for (const auto& t : model.T) put_real(f, t);
    for (const auto& v : model.V) put_real(f, v);
  }
  for (const auto& lam : dump.lambda) put_real(f, lam);
  for (const auto& wl : dump.w)
    for (const auto& wi : wl) put_cplx(f, wi);
  if (!f) throw std::runtime_error("save_model: write failed for " + path);
}

ModelDump load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_model: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_model: bad magic in " + path);
  const auto version = get<std::uint32_t>(f);
  if (version != kModelFormatVersion)
    throw std::runtime_error("load_model: unsupported container version");

  const int num_bins = static_cast<int>(get<std::uint32_t>(f));
  const int j_frames = static_cast<int>(get<std::uint32_t>(f));
  const int m_chan = static_cast<int>(get<std::uint32_t>(f));
  const int n_src = static_cast<int>(get<std::uint32_t>(f));
  const int k_bases = static_cast<int>(get<std::uint32_t>(f));
  const int n_blocks = static_cast<int>(get<std::uint32_t>(f));
  std::vector<int> sizes(n_blocks);
  for (int& s : sizes) s = static_cast<int>(get<std::uint32_t>(f));

  ModelDump dump;
  dump.layout = BlockLayout(sizes);
  if (dump.layout.total != m_chan) throw std::runtime_error("load_model: layout mismatch");
  dump.shared = get<std::uint8_t>(f) != 0;
  dump.config.n_sources = n_src;
  dump.config.k_bases = k_bases;
  dump.config.floor = get<double>(f);
  dump.config.seed = get<std::uint64_t>(f);
  dump.config.sample_rate = get<double>(f);
  dump.config.window_len = static_cast<int>(get<std::uint32_t>(f));
  dump.config.hop_len = static_cast<int>(get<std::uint32_t>(f));
  dump.config.iterations = static_cast<int>(get<std::uint32_t>(f));

  const auto n_models = get<std::uint32_t>(f);
  dump.models.resize(n_models);
  for (auto& model : dump.models) {
    model.K = k_bases;
    model.T.assign(n_src, Eigen::MatrixXd(num_bins, k_bases));
    model.V.assign(n_src, Eigen::MatrixXd(k_bases, j_frames));
    for (auto& t : model.T) get_real(f, t);
    for (auto& v : model.V) get_real(f, v);
  }
  dump.lambda.assign(num_bins, Eigen::MatrixXd(n_src, m_chan));
  for (auto& lam : dump.lambda) get_real(f, lam);
  dump.w.resize(n_blocks);
  for (int l = 0; l < n_blocks; ++l) {
    dump.w[l].assign(num_bins, Eigen::MatrixXcd(sizes[l], sizes[l]));
    for (auto& wi : dump.w[l]) get_cplx(f, wi);
  }
  if (!f) throw std::runtime_error("load_model: truncated file " + path);
  return dump;
}

namespace {

nlohmann::json real_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json cplx_to_json(const Eigen::MatrixXcd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void dump_model_json(const std::string& path, const ModelDump& dump) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["config"] = {{"n_sources", dump.config.n_sources},
                 {"k_bases", dump.config.k_bases},
                 {"iterations", dump.config.iterations},
                 {"floor", dump.config.floor},
                 {"seed", dump.config.seed},
                 {"sample_rate", dump.config.sample_rate},
                 {"window_len", dump.config.window_len},
                 {"hop_len", dump.config.hop_len}};
  j["partition"] = dump.layout.sizes;
  j["share_spectrograms"] = dump.shared;
  for (const auto& model : dump.models) {
    nlohmann::json jm;
    for (const auto& t : model.T) jm["T"].push_back(real_to_json(t));
    for (const auto& v : model.V) jm["V"].push_back(real_to_json(v));
    j["models"].push_back(std::move(jm));
  }
  for (const auto& lam : dump.lambda) j["lambda"].push_back(real_to_json(lam));
  for (const auto& wl : dump.w) {
    nlohmann::json jw = nlohmann::json::array();
    for (const auto& wi : wl) jw.push_back(cplx_to_json(wi));
    j["w"].push_back(std::move(jw));
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("dump_model_json: cannot open " + path);
  f << j.dump();
}

void dump_init_json(const std::string& path, const InitBundle& init) {
  nlohmann::json j;
  j["partition"] = init.layout.sizes;
  j["num_sources"] = init.nmf.num_sources();
  j["k_bases"] = init.nmf.K;
  for (const auto& bin : init.mask.bins) j["mask"].push_back(real_to_json(bin));
  for (const auto& bin : init.h0) j["h0"].push_back(real_to_json(bin));
  for (const auto& lam : init.lambda0) j["lambda0"].push_back(real_to_json(lam));
  for (const auto& wl : init.w0) {
    nlohmann::json jw = nlohmann::json::array();
    for (const auto& wi : wl) jw.push_back(cplx_to_json(wi));
    j["w0"].push_back(std::move(jw));
  }
  for (const auto& t : init.nmf.T) j["t0"].push_back(real_to_json(t));
  for (const auto& v : init.nmf.V) j["v0"].push_back(real_to_json(v));
  std::ofstream f(path);
  if (!f) throw std::runtime_error("dump_init_json: cannot open " + path);
  f << j.dump();
}

void write_trace_csv(const std::string& path, const FitReport& report) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_trace_csv: cannot open " + path);
  f << "iteration,cost,wall_seconds\n";
  f.precision(17);
  for (size_t it = 0; it < report.cost_trace.size(); ++it) {
    const double wall = it == 0 ? 0.0 : report.wall_seconds.at(it - 1);
    f << it << ',' << report.cost_trace[it] << ',' << wall << '\n';
  }
}

void write_eval_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_eval_trace_csv: cannot open " + path);
  f << "iteration,cumulative_seconds,cost,mean_sdr_improvement\n";
  f.precision(17);
  for (const auto& r : rows)
    f << r.iteration << ',' << r.seconds << ',' << r.cost << ',' << r.mean_sdr_improvement
      << '\n';
}

void write_sdr_csv(const std::string& path, const std::vector<SdrCsvRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_sdr_csv: cannot open " + path);
  f << "method,seed,source,sdr_db,improvement_db,permutation\n";
  f.precision(12);
  for (const auto& r : rows)
    f << r.method << ',' << r.seed << ',' << r.source << ',' << r.sdr_db << ','
      << r.improvement_db << ',' << r.permutation << '\n';
}

void write_sdr_summary_json(const std::string& path,
                            const std::vector<std::pair<std::string, std::vector<double>>>&
                                per_method_improvements) {
  nlohmann::json j;
  for (const auto& [method, values] : per_method_improvements) {
    if (values.empty()) continue;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double mean = 0;
    for (double v : sorted) mean += v;
    mean /= n;
    double var = 0;
    for (double v : sorted) var += (v - mean) * (v - mean);
    const double se = sorted.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    const double median = sorted.size() % 2 == 1
                              ? sorted[sorted.size() / 2]
                              : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    j[method] = {{"mean_improvement_db", mean},
                 {"median_improvement_db", median},
                 {"standard_error_db", se},
                 {"trials", sorted.size()}};
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("write_sdr_summary_json: cannot open " + path);
  f << j.dump(2);
}

}  // namespace fastmnmf
