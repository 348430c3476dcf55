#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cclsc/nn.hpp"

namespace cclsc {

struct Dataset {
  MatrixXd features;  // one sample per row
  std::vector<int> labels;
  int num_classes = 0;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

struct Split {
  Dataset train;
  Dataset test;
};

struct GaussianMixtureSpec {
  int k = 8;
  int d = 32;
  int per_class = 625;
  double radius = 5.0;
  double stddev = 1.0;
  std::uint64_t seed = 1;
};

/// Class means on a sphere of the given radius, isotropic Gaussian noise,
/// and a seeded 80/20 split stratified by class.
Split gen_gaussian_mixture(const GaussianMixtureSpec& spec);

/// Class means used by gen_gaussian_mixture (k x d), exposed for oracles.
MatrixXd gaussian_mixture_means(const GaussianMixtureSpec& spec);

/// Seeded per-class 80/20 split.
Split stratified_split(const Dataset& all, std::uint64_t seed, double train_fraction = 0.8);

/// Parses a pair of IDX files (ubyte images, ubyte labels); pixels scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
Dataset parse_idx(const std::vector<unsigned char>& image_bytes, const std::vector<unsigned char>& label_bytes);

/// Numeric CSV with a header row. The label column is named by header or index.
Dataset load_csv(const std::string& path, const std::string& label_column);

/// FNV-1a over dimensions, feature bytes and labels.
std::uint64_t dataset_fingerprint(const Dataset& data);

int infer_num_classes(const std::vector<int>& labels);

}  // namespace cclsc
