#include "cclsc/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "cclsc/errors.hpp"
#include "cclsc/text.hpp"

namespace cclsc {

namespace {

using text::format_double;

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& part : text::split(s, ',')) out.push_back(text::parse_number<double>(part, key));
  return out;
}

struct KeyHandler {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T, typename Proj>
KeyHandler number_key(std::string name, Proj proj) {
  return {name,
          [proj, name](ExperimentConfig& c, const std::string& v) { proj(c) = text::parse_number<T>(v, name); },
          [proj](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return format_double(proj(c));
            else
              return std::to_string(proj(c));
          }};
}

template <typename Proj>
KeyHandler string_key(std::string name, Proj proj) {
  return {name, [proj](ExperimentConfig& c, const std::string& v) { proj(c) = v; },
          [proj](const ExperimentConfig& c) { return proj(c); }};
}

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> t;
    t.push_back({"method",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "ccl-sc") c.train.method = Method::ccl_sc;
                   else if (v == "ce-baseline") c.train.method = Method::ce_baseline;
                   else throw ConfigError("method: expected ccl-sc or ce-baseline, got '" + v + "'");
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.train.method == Method::ccl_sc ? "ccl-sc" : "ce-baseline");
                 }});
    t.push_back({"hidden",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.train.hidden.clear();
                   if (text::trim(v).empty() || v == "none") return;
                   for (const auto& part : text::split(v, ','))
                     c.train.hidden.push_back(text::parse_number<Eigen::Index>(part, "hidden"));
                 },
                 [](const ExperimentConfig& c) {
                   if (c.train.hidden.empty()) return std::string("none");
                   std::string out;
                   for (std::size_t i = 0; i < c.train.hidden.size(); ++i)
                     out += (i ? "," : "") + std::to_string(c.train.hidden[i]);
                   return out;
                 }});
    t.push_back(number_key<Eigen::Index>("embedding_dim", [](auto& c) -> auto& { return c.train.embedding_dim; }));
    t.push_back(number_key<int>("epochs", [](auto& c) -> auto& { return c.train.epochs; }));
    t.push_back(number_key<int>("batch_size", [](auto& c) -> auto& { return c.train.batch_size; }));
    t.push_back(number_key<int>("e_s", [](auto& c) -> auto& { return c.train.e_s; }));
    t.push_back(number_key<double>("w", [](auto& c) -> auto& { return c.train.w; }));
    t.push_back(number_key<double>("q", [](auto& c) -> auto& { return c.train.q; }));
    t.push_back({"s",
                 [](ExperimentConfig& c, const std::string& v) {
                   c.auto_queue_capacity = v == "auto";
                   if (!c.auto_queue_capacity) c.train.s = text::parse_number<std::size_t>(v, "s");
                 },
                 [](const ExperimentConfig& c) {
                   return c.auto_queue_capacity ? std::string("auto") : std::to_string(c.train.s);
                 }});
    t.push_back(number_key<double>("tau", [](auto& c) -> auto& { return c.train.tau; }));
    t.push_back(number_key<double>("lr", [](auto& c) -> auto& { return c.train.lr; }));
    t.push_back(number_key<double>("lr_decay", [](auto& c) -> auto& { return c.train.lr_decay; }));
    t.push_back(number_key<int>("lr_interval", [](auto& c) -> auto& { return c.train.lr_interval; }));
    t.push_back(number_key<double>("sgd_momentum", [](auto& c) -> auto& { return c.train.sgd_momentum; }));
    t.push_back(number_key<double>("weight_decay", [](auto& c) -> auto& { return c.train.weight_decay; }));
    t.push_back(number_key<std::uint64_t>("seed", [](auto& c) -> auto& { return c.train.seed; }));
    t.push_back({"head",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "cross-entropy") c.train.head = Head::cross_entropy;
                   else if (v == "sat-em") c.train.head = Head::sat_em;
                   else throw ConfigError("head: expected cross-entropy or sat-em, got '" + v + "'");
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.train.head == Head::sat_em ? "sat-em" : "cross-entropy");
                 }});
    t.push_back(number_key<double>("m_sat", [](auto& c) -> auto& { return c.train.m_sat; }));
    t.push_back(number_key<double>("beta_em", [](auto& c) -> auto& { return c.train.beta_em; }));
    t.push_back(number_key<int>("e_s_sat", [](auto& c) -> auto& { return c.train.e_s_sat; }));
    t.push_back(number_key<double>("bound.rho", [](auto& c) -> auto& { return c.train.bound.margin.rho; }));
    t.push_back(number_key<double>("bound.rho_prime", [](auto& c) -> auto& { return c.train.bound.margin.rho_prime; }));
    t.push_back(number_key<double>("bound.alpha", [](auto& c) -> auto& { return c.train.bound.margin.alpha; }));
    t.push_back(number_key<double>("bound.beta", [](auto& c) -> auto& { return c.train.bound.margin.beta; }));
    t.push_back(number_key<double>("bound.lambda", [](auto& c) -> auto& { return c.train.bound.margin.lambda; }));
    t.push_back(number_key<double>("bound.delta", [](auto& c) -> auto& { return c.train.bound.delta; }));
    t.push_back(number_key<double>("bound.h", [](auto& c) -> auto& { return c.train.bound.h; }));
    t.push_back({"dataset.source",
                 [](ExperimentConfig& c, const std::string& v) {
                   if (v == "synthetic-gaussians") c.dataset.source = DataSource::synthetic_gaussians;
                   else if (v == "idx-files") c.dataset.source = DataSource::idx_files;
                   else if (v == "csv-file") c.dataset.source = DataSource::csv_file;
                   else throw ConfigError("dataset.source: unknown source '" + v + "'");
                 },
                 [](const ExperimentConfig& c) {
                   switch (c.dataset.source) {
                     case DataSource::idx_files: return std::string("idx-files");
                     case DataSource::csv_file: return std::string("csv-file");
                     default: return std::string("synthetic-gaussians");
                   }
                 }});
    t.push_back(number_key<int>("dataset.k", [](auto& c) -> auto& { return c.dataset.gaussian.k; }));
    t.push_back(number_key<int>("dataset.d", [](auto& c) -> auto& { return c.dataset.gaussian.d; }));
    t.push_back(number_key<int>("dataset.per_class", [](auto& c) -> auto& { return c.dataset.gaussian.per_class; }));
    t.push_back(number_key<double>("dataset.radius", [](auto& c) -> auto& { return c.dataset.gaussian.radius; }));
    t.push_back(number_key<double>("dataset.std", [](auto& c) -> auto& { return c.dataset.gaussian.stddev; }));
    t.push_back(number_key<std::uint64_t>("dataset.seed", [](auto& c) -> auto& { return c.dataset.gaussian.seed; }));
    t.push_back(string_key("dataset.images", [](auto& c) -> auto& { return c.dataset.images; }));
    t.push_back(string_key("dataset.labels", [](auto& c) -> auto& { return c.dataset.labels; }));
    t.push_back(string_key("dataset.test_images", [](auto& c) -> auto& { return c.dataset.test_images; }));
    t.push_back(string_key("dataset.test_labels", [](auto& c) -> auto& { return c.dataset.test_labels; }));
    t.push_back(string_key("dataset.csv", [](auto& c) -> auto& { return c.dataset.csv_path; }));
    t.push_back(string_key("dataset.label_column", [](auto& c) -> auto& { return c.dataset.label_column; }));
    t.push_back(number_key<std::uint64_t>("dataset.split_seed", [](auto& c) -> auto& { return c.dataset.split_seed; }));
    t.push_back({"coverages",
                 [](ExperimentConfig& c, const std::string& v) { c.coverages = parse_doubles(v, "coverages"); },
                 [](const ExperimentConfig& c) { return join_doubles(c.coverages); }});
    t.push_back(string_key("output_dir", [](auto& c) -> auto& { return c.output_dir; }));
    return t;
  }();
  return table;
}

const KeyHandler& find_handler(const std::string& key) {
  for (const auto& h : handlers())
    if (h.name == key) return h;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& h : handlers()) out.push_back(h.name);
    return out;
  }();
  return keys;
}

void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  find_handler(key).set(cfg, std::string(text::trim(value)));
}

std::string config_value(const ExperimentConfig& cfg, const std::string& key) {
  return find_handler(key).get(cfg);
}

ExperimentConfig parse_config(const std::string& content) {
  ExperimentConfig cfg;
  std::istringstream in(content);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string value(text::trim(body.substr(eq + 1)));
    try {
      apply_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& h : handlers()) out += h.name + " = " + h.get(cfg) + "\n";
  return out;
}

void DatasetSpec::validate() const {
  switch (source) {
    case DataSource::synthetic_gaussians:
      if (gaussian.k < 2) throw ConfigError("dataset.k must be at least 2");
      if (gaussian.d < 1) throw ConfigError("dataset.d must be at least 1");
      if (!(gaussian.stddev > 0)) throw ConfigError("dataset.std must be positive");
      break;
    case DataSource::idx_files:
      if (images.empty() || labels.empty()) throw ConfigError("idx-files needs dataset.images and dataset.labels");
      if (test_images.empty() != test_labels.empty())
        throw ConfigError("dataset.test_images and dataset.test_labels go together");
      break;
    case DataSource::csv_file:
      if (csv_path.empty()) throw ConfigError("csv-file needs dataset.csv");
      break;
  }
}

Split build_dataset(const DatasetSpec& spec) {
  spec.validate();
  switch (spec.source) {
    case DataSource::synthetic_gaussians:
      return gen_gaussian_mixture(spec.gaussian);
    case DataSource::idx_files: {
      Dataset train = load_idx(spec.images, spec.labels);
      if (spec.test_images.empty()) return stratified_split(train, spec.split_seed);
      Dataset test = load_idx(spec.test_images, spec.test_labels);
      const int k = std::max(train.num_classes, test.num_classes);
      train.num_classes = test.num_classes = k;
      return {std::move(train), std::move(test)};
    }
    case DataSource::csv_file:
      return stratified_split(load_csv(spec.csv_path, spec.label_column), spec.split_seed);
  }
  throw ConfigError("unknown dataset source");
}

}  // namespace cclsc
