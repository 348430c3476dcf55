#include "cclsc/run.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cclsc/checkpoint.hpp"
#include "cclsc/errors.hpp"
#include "cclsc/text.hpp"

namespace fs = std::filesystem;

namespace cclsc {

using text::format_double;

// ---------------------------------------------------------------------------
// CSV writers

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << kHistoryHeader << '\n';
  for (const auto& r : history.epochs) {
    out << r.epoch << ',' << format_double(r.head_loss) << ',' << format_double(r.csc_loss) << ','
        << r.csc_anchors << ',' << format_double(r.train_accuracy) << ',' << format_double(r.test_accuracy) << ','
        << format_double(r.var_intra) << ',' << format_double(r.classifier_norm) << ','
        << format_double(r.bound) << ',' << format_double(r.empirical_mh) << '\n';
  }
}

void write_curve_csv(std::ostream& out, const std::vector<RiskCoveragePoint>& curve) {
  out << kCurveHeader << '\n';
  for (const auto& p : curve) {
    out << format_double(p.target_coverage) << ',' << format_double(p.threshold) << ','
        << format_double(p.realized_coverage) << ',' << text::format_fixed(100.0 * p.selective_risk, 4) << ','
        << p.selected << ',' << p.errors << '\n';
  }
}

void write_bound_csv(std::ostream& out, const std::vector<BoundReport>& reports) {
  out << kBoundHeader << '\n';
  for (const auto& r : reports) {
    out << r.epoch << ',' << format_double(r.inputs.var_intra) << ',' << format_double(r.inputs.classifier_norm)
        << ',' << format_double(r.inputs.rho_tilde) << ',' << format_double(r.inputs.empirical_margin_loss) << ','
        << format_double(r.bound_value) << ',' << format_double(r.train_l0) << ',' << format_double(r.test_l0)
        << ',' << format_double(r.gap) << '\n';
  }
}

// ---------------------------------------------------------------------------
// CSV readers

namespace {

std::vector<std::vector<std::string>> read_rows(std::istream& in, const char* header) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != header)
    throw FormatError(std::string("unexpected CSV header, expected '") + header + "'");
  const auto columns = text::split(header, ',').size();
  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto fields = text::split(line, ',');
    if (fields.size() != columns)
      throw FormatError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(columns) + " fields");
    rows.push_back(std::move(fields));
  }
  return rows;
}

double num(const std::string& s) { return text::parse_number<double>(s, "CSV field"); }
std::uint64_t count(const std::string& s) { return text::parse_number<std::uint64_t>(s, "CSV field"); }

}  // namespace

std::vector<EpochRecord> read_history_csv(std::istream& in) {
  std::vector<EpochRecord> out;
  for (const auto& f : read_rows(in, kHistoryHeader)) {
    EpochRecord r;
    r.epoch = static_cast<int>(count(f[0]));
    r.head_loss = num(f[1]);
    r.csc_loss = num(f[2]);
    r.csc_anchors = count(f[3]);
    r.train_accuracy = num(f[4]);
    r.test_accuracy = num(f[5]);
    r.var_intra = num(f[6]);
    r.classifier_norm = num(f[7]);
    r.bound = num(f[8]);
    r.empirical_mh = num(f[9]);
    out.push_back(r);
  }
  return out;
}

std::vector<RiskCoveragePoint> read_curve_csv(std::istream& in) {
  std::vector<RiskCoveragePoint> out;
  for (const auto& f : read_rows(in, kCurveHeader)) {
    RiskCoveragePoint p;
    p.target_coverage = num(f[0]);
    p.threshold = num(f[1]);
    p.realized_coverage = num(f[2]);
    p.selective_risk = num(f[3]) / 100.0;
    p.selected = count(f[4]);
    p.errors = count(f[5]);
    out.push_back(p);
  }
  return out;
}

std::vector<BoundReport> read_bound_csv(std::istream& in) {
  std::vector<BoundReport> out;
  for (const auto& f : read_rows(in, kBoundHeader)) {
    BoundReport r;
    r.epoch = static_cast<int>(count(f[0]));
    r.inputs.var_intra = num(f[1]);
    r.inputs.classifier_norm = num(f[2]);
    r.inputs.rho_tilde = num(f[3]);
    r.inputs.empirical_margin_loss = num(f[4]);
    r.bound_value = num(f[5]);
    r.train_l0 = num(f[6]);
    r.test_l0 = num(f[7]);
    r.gap = num(f[8]);
    out.push_back(r);
  }
  return out;
}

std::vector<RiskCoveragePoint> load_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_curve_csv(in);
}

// ---------------------------------------------------------------------------
// Experiments

TrainConfig resolve_train_config(const ExperimentConfig& cfg, const Split& data) {
  TrainConfig t = cfg.train;
  if (cfg.auto_queue_capacity) t.s = default_queue_capacity(data.train.num_classes);
  return t;
}

ExperimentOutputs run_in_memory(const ExperimentConfig& cfg, const Split& data) {
  const TrainConfig t = resolve_train_config(cfg, data);
  ExperimentOutputs out;
  out.trained = train(data.train, data.test, t);
  const Dataset& eval = data.test.size() > 0 ? data.test : data.train;
  const auto scored = score_dataset(out.trained.params, eval.features, eval.labels, data.train.num_classes);
  out.curve = risk_coverage_curve(scored, cfg.coverages);
  return out;
}

namespace {

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return ss.str();
}

fs::path fresh_run_dir(const fs::path& root) {
  fs::create_directories(root);
  const std::string base = "run-" + utc_stamp();
  for (int attempt = 1;; ++attempt) {
    fs::path dir = root / (attempt == 1 ? base : base + "-" + std::to_string(attempt));
    if (fs::create_directory(dir)) return dir;
  }
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  writer(out);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  for (double c : cfg.coverages)
    if (!(c > 0 && c <= 1)) throw ConfigError("coverage targets must lie in (0, 1]");
  const Split data = build_dataset(cfg.dataset);
  const auto outputs = run_in_memory(cfg, data);

  const fs::path dir = fresh_run_dir(cfg.output_dir);
  RunRecord rec;
  rec.run_dir = dir.string();
  rec.config_path = (dir / "config.txt").string();
  rec.history_csv = (dir / "history.csv").string();
  rec.curve_csv = (dir / "curve.csv").string();
  rec.bound_csv = (dir / "bound.csv").string();
  rec.checkpoint = (dir / "checkpoint.txt").string();
  rec.dataset_fingerprint = dataset_fingerprint(data.train) ^ (dataset_fingerprint(data.test) * 31);

  write_file(rec.config_path, [&](std::ostream& o) { o << config_to_text(cfg); });
  write_file(rec.history_csv, [&](std::ostream& o) { write_history_csv(o, outputs.trained.history); });
  write_file(rec.curve_csv, [&](std::ostream& o) { write_curve_csv(o, outputs.curve); });
  write_file(rec.bound_csv, [&](std::ostream& o) { write_bound_csv(o, outputs.trained.history.bounds); });
  save_checkpoint(rec.checkpoint, outputs.trained.params);

  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_file(dir / "run.txt", [&](std::ostream& o) {
    o << "dataset_fingerprint = " << std::hex << std::setw(16) << std::setfill('0') << rec.dataset_fingerprint
      << std::dec << '\n'
      << "history_csv = history.csv\ncurve_csv = curve.csv\nbound_csv = bound.csv\ncheckpoint = checkpoint.txt\n"
      << "wall_seconds = " << format_double(rec.wall_seconds) << '\n';
  });
  return rec;
}

RunRecord run_experiment(const std::string& config_path) {
  return run_experiment(load_config(config_path));
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

}  // namespace

std::vector<CoverageComparison> compare_curves(const std::vector<std::vector<RiskCoveragePoint>>& a,
                                               const std::vector<std::vector<RiskCoveragePoint>>& b,
                                               double coverage, double alpha) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("comparison needs at least two runs per side");
  const auto& grid = a.front();
  auto same_grid = [&](const std::vector<RiskCoveragePoint>& c) {
    if (c.size() != grid.size()) return false;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i].target_coverage != grid[i].target_coverage) return false;
    return true;
  };
  for (const auto& c : a)
    if (!same_grid(c)) throw ConfigError("runs have mismatched coverage grids");
  for (const auto& c : b)
    if (!same_grid(c)) throw ConfigError("runs have mismatched coverage grids");

  std::vector<CoverageComparison> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double cov = grid[i].target_coverage;
    if (coverage > 0 && cov != coverage) continue;
    std::vector<double> ra, rb;
    for (const auto& c : a) ra.push_back(c[i].selective_risk);
    for (const auto& c : b) rb.push_back(c[i].selective_risk);
    CoverageComparison row;
    row.coverage = cov;
    std::tie(row.mean_a, row.std_a) = mean_std(ra);
    std::tie(row.mean_b, row.std_b) = mean_std(rb);
    row.test = rank_sum_test(ra, rb);
    if (row.test.p_value < alpha)
      row.verdict = row.mean_a < row.mean_b ? "better" : "worse";
    else
      row.verdict = "tie";
    out.push_back(row);
  }
  if (coverage > 0 && out.empty())
    throw ConfigError("coverage " + format_double(coverage) + " is not on the runs' grid");
  return out;
}

std::vector<CoverageComparison> compare_runs(const std::vector<std::string>& runs_a,
                                             const std::vector<std::string>& runs_b, double coverage,
                                             double alpha) {
  auto load_all = [](const std::vector<std::string>& dirs) {
    std::vector<std::vector<RiskCoveragePoint>> curves;
    for (const auto& d : dirs) curves.push_back(load_curve((fs::path(d) / "curve.csv").string()));
    return curves;
  };
  if (runs_a.size() < 2 || runs_b.size() < 2) throw ConfigError("comparison needs at least two runs per side");
  return compare_curves(load_all(runs_a), load_all(runs_b), coverage, alpha);
}

void write_comparison(std::ostream& out, const std::vector<CoverageComparison>& rows) {
  out << "coverage,mean_a_percent,std_a_percent,mean_b_percent,std_b_percent,u,p_value,verdict\n";
  for (const auto& r : rows) {
    out << format_double(r.coverage) << ',' << text::format_fixed(100 * r.mean_a, 2) << ','
        << text::format_fixed(100 * r.std_a, 2) << ',' << text::format_fixed(100 * r.mean_b, 2) << ','
        << text::format_fixed(100 * r.std_b, 2) << ',' << format_double(r.test.u_statistic) << ','
        << format_double(r.test.p_value) << ',' << r.verdict << '\n';
  }
}

}  // namespace cclsc
