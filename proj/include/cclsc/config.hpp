#pragma once

// Flat key-value experiment configuration. One `key = value` per line, `#`
// starts a comment, unknown keys are rejected. See README for the key list.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cclsc/dataset.hpp"
#include "cclsc/seleval.hpp"
#include "cclsc/trainer.hpp"

namespace cclsc {

enum class DataSource { synthetic_gaussians, idx_files, csv_file };

struct DatasetSpec {
  DataSource source = DataSource::synthetic_gaussians;
  GaussianMixtureSpec gaussian;
  std::string images, labels;            // idx training files
  std::string test_images, test_labels;  // optional idx test files
  std::string csv_path;
  std::string label_column = "label";
  std::uint64_t split_seed = 7;          // split for idx/csv without a test file

  void validate() const;
};

struct ExperimentConfig {
  TrainConfig train;
  bool auto_queue_capacity = false;  // s = auto: pick from class count
  DatasetSpec dataset;
  std::vector<double> coverages = default_coverage_grid();
  std::string output_dir = "runs";
};

/// All recognised keys, in the order the snapshot writes them.
const std::vector<std::string>& config_keys();

void apply_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Current value of a key as it would appear in a config file.
std::string config_value(const ExperimentConfig& cfg, const std::string& key);
std::string config_to_text(const ExperimentConfig& cfg);

Split build_dataset(const DatasetSpec& spec);

}  // namespace cclsc
