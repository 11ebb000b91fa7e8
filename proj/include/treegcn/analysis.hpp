#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "treegcn/mesh_io.hpp"
#include "treegcn/model.hpp"

namespace treegcn {

// ---- Latent interpolation --------------------------------------------------------

// (1 - a_i) z1 + a_i z2 for a_i = i / (steps - 1).
std::vector<std::vector<double>> interpolation_path(const std::vector<double>& z1, const std::vector<double>& z2,
                                                    std::size_t steps);

// Decodes every point of the interpolation path.
std::vector<PointCloud> interpolate(const std::vector<double>& z1, const std::vector<double>& z2, std::size_t steps,
                                    const TreeGcnModel& model);

// frame_0000.pcf, frame_0001.pcf, ... in `dir`. Returns the paths written.
std::vector<std::filesystem::path> write_frames(const std::vector<PointCloud>& frames,
                                                const std::filesystem::path& dir);

// ---- Embeddings ------------------------------------------------------------------

struct EmbeddingRecord {
  std::string id;
  std::string label;
  std::vector<double> vector;
};

// Encodes clouds on up to `threads` workers (0 = hardware concurrency);
// records come back in input order. Empty ids default to the index.
std::vector<EmbeddingRecord> encode_all(const TreeGcnModel& model, const std::vector<PointCloud>& clouds,
                                        const std::vector<std::string>& ids, std::size_t threads = 0);

// "id,label,v0,...,v{d-1}" header plus one row per record, 12 significant digits.
std::string embeddings_csv(const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> parse_embeddings_csv(std::string_view text);

// Encodes `clouds` and writes the CSV to `path`; returns the row count.
std::size_t export_embeddings(const std::vector<PointCloud>& clouds, const std::vector<std::string>& ids,
                              const TreeGcnModel& model, const std::filesystem::path& path);

// ---- Linear SVM probe --------------------------------------------------------------

struct SvmConfig {
  double c = 1.0;
  std::size_t epochs = 200;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};

// One-vs-rest linear SVM over standardized features. Classes are sorted by name.
struct LinearSvmModel {
  std::vector<std::string> classes;
  std::vector<std::vector<double>> weights;
  std::vector<double> biases;
  double c = 1.0;
  // x' = (x - feature_mean) / feature_scale, fitted on the training records.
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;

  std::size_t dim() const { return weights.empty() ? 0 : weights.front().size(); }
};

// Standardizes each feature (unit sample std; constant features get scale 1),
// then minimises 1/2 |w|^2 + C sum_i max(0, 1 - y_i (w.x_i + b)) per class by
// shuffled per-sample sub-gradient steps with rate lr / (1 + epoch).
LinearSvmModel train_linear_svm(const std::vector<EmbeddingRecord>& records, const SvmConfig& config);

// Index of the class with the largest margin; ties go to the lowest index.
std::size_t classify_index(const LinearSvmModel& model, const std::vector<double>& vector);
const std::string& classify(const LinearSvmModel& model, const std::vector<double>& vector);
double accuracy(const LinearSvmModel& model, const std::vector<EmbeddingRecord>& records);

}  // namespace treegcn
