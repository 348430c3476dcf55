#include "cclsc/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include "cclsc/errors.hpp"

namespace cclsc {

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), dim());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

int infer_num_classes(const std::vector<int>& labels) {
  if (labels.empty()) return 0;
  const int hi = *std::max_element(labels.begin(), labels.end());
  if (*std::min_element(labels.begin(), labels.end()) < 0) throw InputError("negative label");
  return hi + 1;
}

MatrixXd gaussian_mixture_means(const GaussianMixtureSpec& spec) {
  if (spec.k < 2 || spec.d < 1) throw ConfigError("gaussian mixture needs k >= 2 and d >= 1");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd means(spec.k, spec.d);
  for (int c = 0; c < spec.k; ++c) {
    VectorXd dir(spec.d);
    do {
      for (int j = 0; j < spec.d; ++j) dir(j) = normal(rng);
    } while (dir.norm() == 0.0);
    means.row(c) = spec.radius * dir.normalized().transpose();
  }
  return means;
}

Split gen_gaussian_mixture(const GaussianMixtureSpec& spec) {
  if (!(spec.stddev > 0)) throw ConfigError("gaussian mixture stddev must be positive");
  if (spec.per_class < 2) throw ConfigError("gaussian mixture needs at least two samples per class");
  const MatrixXd means = gaussian_mixture_means(spec);

  // Separate stream for the noise so the means do not depend on sample count.
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, spec.stddev);
  Dataset all;
  all.num_classes = spec.k;
  all.features.resize(static_cast<Eigen::Index>(spec.k) * spec.per_class, spec.d);
  all.labels.reserve(static_cast<std::size_t>(spec.k * spec.per_class));
  Eigen::Index r = 0;
  for (int c = 0; c < spec.k; ++c) {
    for (int i = 0; i < spec.per_class; ++i, ++r) {
      for (int j = 0; j < spec.d; ++j) all.features(r, j) = means(c, j) + normal(rng);
      all.labels.push_back(c);
    }
  }
  return stratified_split(all, spec.seed + 1);
}

Split stratified_split(const Dataset& all, std::uint64_t seed, double train_fraction) {
  std::mt19937_64 rng(seed);
  const int k = std::max(all.num_classes, infer_num_classes(all.labels));
  std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < all.labels.size(); ++i)
    by_class[static_cast<std::size_t>(all.labels[i])].push_back(static_cast<Eigen::Index>(i));

  std::vector<Eigen::Index> train_rows, test_rows;
  for (auto& rows : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  Split out{all.subset(train_rows), all.subset(test_rows)};
  out.train.num_classes = out.test.num_classes = k;
  return out;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const char* what) {
  if (offset + 4 > bytes.size())
    throw FormatError(std::string(what) + ": truncated header at byte offset " + std::to_string(offset));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset parse_idx(const std::vector<unsigned char>& image_bytes, const std::vector<unsigned char>& label_bytes) {
  constexpr std::uint32_t kImageMagic = 0x00000803;
  constexpr std::uint32_t kLabelMagic = 0x00000801;
  if (read_be32(image_bytes, 0, "images") != kImageMagic)
    throw FormatError("images: bad magic at byte offset 0");
  if (read_be32(label_bytes, 0, "labels") != kLabelMagic)
    throw FormatError("labels: bad magic at byte offset 0");

  const std::size_t n = read_be32(image_bytes, 4, "images");
  const std::size_t rows = read_be32(image_bytes, 8, "images");
  const std::size_t cols = read_be32(image_bytes, 12, "images");
  const std::size_t n_labels = read_be32(label_bytes, 4, "labels");
  if (n != n_labels)
    throw FormatError("count mismatch at byte offset 4: " + std::to_string(n) + " images vs " +
                      std::to_string(n_labels) + " labels");
  const std::size_t pixels = rows * cols;
  if (image_bytes.size() < 16 + n * pixels)
    throw FormatError("images: truncated pixel data at byte offset " + std::to_string(image_bytes.size()));
  if (label_bytes.size() < 8 + n)
    throw FormatError("labels: truncated label data at byte offset " + std::to_string(label_bytes.size()));

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < pixels; ++j)
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          static_cast<double>(image_bytes[16 + i * pixels + j]) / 255.0;
    out.labels[i] = label_bytes[8 + i];
  }
  out.num_classes = infer_num_classes(out.labels);
  return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  return parse_idx(read_file(images_path), read_file(labels_path));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);

  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == label_column) label_idx = i;
  if (label_idx == header.size()) {
    try {
      label_idx = static_cast<std::size_t>(std::stoul(label_column));
    } catch (const std::exception&) {
      throw ConfigError("label column '" + label_column + "' not found in " + path);
    }
    if (label_idx >= header.size()) throw ConfigError("label column index out of range");
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const double v = parse_double(fields[i], line_no);
      if (i == label_idx) {
        if (v != std::floor(v) || v < 0) throw FormatError("line " + std::to_string(line_no) + ": bad label");
        labels.push_back(static_cast<int>(v));
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path + ": no data rows");

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size() - 1));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  out.labels = std::move(labels);
  out.num_classes = infer_num_classes(out.labels);
  return out;
}

std::uint64_t dataset_fingerprint(const Dataset& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::int64_t rows = data.features.rows(), cols = data.features.cols();
  mix(&rows, sizeof rows);
  mix(&cols, sizeof cols);
  for (Eigen::Index i = 0; i < data.features.rows(); ++i)
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      const double v = data.features(i, j);
      mix(&v, sizeof v);
    }
  for (int y : data.labels) mix(&y, sizeof y);
  return h;
}

}  // namespace cclsc
