#include "treegcn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <limits>
#include <thread>

#include "treegcn/error.hpp"
#include "treegcn/rng.hpp"

namespace treegcn {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> interpolation_path(const std::vector<double>& z1, const std::vector<double>& z2,
                                                    std::size_t steps) {
  if (z1.size() != z2.size() || z1.empty()) {
    raise(ErrorKind::kContract, "interpolate: embeddings of dimension " + std::to_string(z1.size()) + " and " +
                                    std::to_string(z2.size()));
  }
  if (steps < 2) raise(ErrorKind::kContract, "interpolate: steps must be at least 2");
  std::vector<std::vector<double>> path(steps, std::vector<double>(z1.size()));
  for (std::size_t i = 0; i < steps; ++i) {
    const double alpha = static_cast<double>(i) / static_cast<double>(steps - 1);
    for (std::size_t d = 0; d < z1.size(); ++d) path[i][d] = (1.0 - alpha) * z1[d] + alpha * z2[d];
  }
  return path;
}

std::vector<PointCloud> interpolate(const std::vector<double>& z1, const std::vector<double>& z2, std::size_t steps,
                                    const TreeGcnModel& model) {
  if (z1.size() != model.config().embedding_dim) {
    raise(ErrorKind::kContract, "interpolate: embedding dimension " + std::to_string(z1.size()) +
                                    " does not match model " + std::to_string(model.config().embedding_dim));
  }
  std::vector<PointCloud> frames;
  for (const auto& z : interpolation_path(z1, z2, steps)) frames.push_back(model.generate(z));
  return frames;
}

std::vector<std::filesystem::path> write_frames(const std::vector<PointCloud>& frames,
                                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.pcf", i);
    paths.push_back(dir / name);
    write_cloud(frames[i], paths.back());
  }
  return paths;
}

std::vector<EmbeddingRecord> encode_all(const TreeGcnModel& model, const std::vector<PointCloud>& clouds,
                                        const std::vector<std::string>& ids, std::size_t threads) {
  if (!ids.empty() && ids.size() != clouds.size()) raise(ErrorKind::kContract, "encode_all: ids/clouds size mismatch");
  std::vector<EmbeddingRecord> records(clouds.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(1, clouds.size()));

  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < clouds.size(); i += threads) {
      records[i].id = ids.empty() ? std::to_string(i) : ids[i];
      records[i].label = clouds[i].label.value_or("");
      records[i].vector = model.embed(clouds[i]);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  return records;
}

std::string embeddings_csv(const std::vector<EmbeddingRecord>& records) {
  const std::size_t dim = records.empty() ? 0 : records.front().vector.size();
  std::string out = "id,label";
  for (std::size_t d = 0; d < dim; ++d) out += ",v" + std::to_string(d);
  out += '\n';
  char buf[40];
  for (const auto& r : records) {
    if (r.vector.size() != dim) raise(ErrorKind::kContract, "embeddings_csv: ragged embeddings");
    out += r.id + ',' + r.label;
    for (double v : r.vector) {
      const int len = std::snprintf(buf, sizeof buf, ",%.12g", v);
      out.append(buf, static_cast<std::size_t>(len));
    }
    out += '\n';
  }
  return out;
}

std::vector<EmbeddingRecord> parse_embeddings_csv(std::string_view text) {
  std::vector<EmbeddingRecord> records;
  std::size_t line_no = 0, dim = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (line_no == 1) {
      if (fields.size() < 3 || fields[0] != "id" || fields[1] != "label") {
        raise(ErrorKind::kFormat, "embedding CSV: header must start with id,label,v0");
      }
      dim = fields.size() - 2;
      continue;
    }
    if (fields.size() != dim + 2) {
      raise(ErrorKind::kFormat, "embedding CSV line " + std::to_string(line_no) + ": expected " +
                                    std::to_string(dim + 2) + " fields");
    }
    EmbeddingRecord r{std::string(fields[0]), std::string(fields[1]), {}};
    for (std::size_t d = 0; d < dim; ++d) {
      const std::string token(fields[d + 2]);
      char* stop = nullptr;
      const double v = std::strtod(token.c_str(), &stop);
      if (token.empty() || *stop != '\0' || !std::isfinite(v)) {
        raise(ErrorKind::kFormat, "embedding CSV line " + std::to_string(line_no) + ": bad value '" + token + "'");
      }
      r.vector.push_back(v);
    }
    records.push_back(std::move(r));
  }
  if (line_no == 0) raise(ErrorKind::kFormat, "embedding CSV: empty input");
  return records;
}

std::size_t export_embeddings(const std::vector<PointCloud>& clouds, const std::vector<std::string>& ids,
                              const TreeGcnModel& model, const std::filesystem::path& path) {
  const auto records = encode_all(model, clouds, ids);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::kIo, "cannot write " + path.string());
  out << embeddings_csv(records);
  if (!out) raise(ErrorKind::kIo, "short write to " + path.string());
  return records.size();
}

// ---- Linear SVM --------------------------------------------------------------------

namespace {

std::vector<double> standardize(const LinearSvmModel& model, const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t d = 0; d < x.size(); ++d) out[d] = (x[d] - model.feature_mean[d]) / model.feature_scale[d];
  return out;
}

}  // namespace

LinearSvmModel train_linear_svm(const std::vector<EmbeddingRecord>& records, const SvmConfig& config) {
  if (records.empty()) raise(ErrorKind::kContract, "train_linear_svm: no records");
  if (!(config.c > 0.0) || !(config.learning_rate > 0.0) || config.epochs == 0) {
    raise(ErrorKind::kContract, "train_linear_svm: c, learning_rate and epochs must be positive");
  }
  const std::size_t dim = records.front().vector.size();
  std::set<std::string> names;
  for (const auto& r : records) {
    if (r.vector.size() != dim) raise(ErrorKind::kContract, "train_linear_svm: ragged feature vectors");
    names.insert(r.label);
  }
  if (names.size() < 2) raise(ErrorKind::kContract, "train_linear_svm: need at least 2 classes");

  LinearSvmModel model;
  model.classes.assign(names.begin(), names.end());
  model.c = config.c;
  const std::size_t k = model.classes.size(), n = records.size();
  for (const auto& name : model.classes) {
    const auto count = std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.label == name; });
    if (count < 2) raise(ErrorKind::kContract, "train_linear_svm: class '" + name + "' has fewer than 2 samples");
  }
  std::vector<std::size_t> label_index(n);
  for (std::size_t i = 0; i < n; ++i) {
    label_index[i] = static_cast<std::size_t>(
        std::lower_bound(model.classes.begin(), model.classes.end(), records[i].label) - model.classes.begin());
  }
  model.weights.assign(k, std::vector<double>(dim, 0.0));
  model.biases.assign(k, 0.0);
  model.feature_mean.assign(dim, 0.0);
  model.feature_scale.assign(dim, 0.0);
  for (const auto& r : records) {
    for (std::size_t d = 0; d < dim; ++d) model.feature_mean[d] += r.vector[d];
  }
  for (double& m : model.feature_mean) m /= static_cast<double>(n);
  for (const auto& r : records) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double delta = r.vector[d] - model.feature_mean[d];
      model.feature_scale[d] += delta * delta;
    }
  }
  for (double& s : model.feature_scale) {
    s = std::sqrt(s / static_cast<double>(n - 1));
    if (!(s > 0.0)) s = 1.0;
  }
  std::vector<std::vector<double>> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = standardize(model, records[i].vector);

  Rng rng = Rng::stream(config.seed, "svm");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const double shrink = 1.0 / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    const double eta = config.learning_rate / (1.0 + static_cast<double>(epoch));
    for (std::size_t i : order) {
      const auto& x = xs[i];
      for (std::size_t cls = 0; cls < k; ++cls) {
        auto& w = model.weights[cls];
        const double y = label_index[i] == cls ? 1.0 : -1.0;
        double margin = model.biases[cls];
        for (std::size_t d = 0; d < dim; ++d) margin += w[d] * x[d];
        const bool violated = y * margin < 1.0;
        for (std::size_t d = 0; d < dim; ++d) {
          double g = shrink * w[d];
          if (violated) g -= config.c * y * x[d];
          w[d] -= eta * g;
        }
        if (violated) model.biases[cls] += eta * config.c * y;
      }
    }
  }
  return model;
}

std::size_t classify_index(const LinearSvmModel& model, const std::vector<double>& vector) {
  if (vector.size() != model.dim()) {
    raise(ErrorKind::kContract, "classify: vector dimension " + std::to_string(vector.size()) + ", model expects " +
                                    std::to_string(model.dim()));
  }
  const std::vector<double> x = standardize(model, vector);
  std::size_t best = 0;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t cls = 0; cls < model.classes.size(); ++cls) {
    double margin = model.biases[cls];
    for (std::size_t d = 0; d < x.size(); ++d) margin += model.weights[cls][d] * x[d];
    if (margin > best_margin) {
      best_margin = margin;
      best = cls;
    }
  }
  return best;
}

const std::string& classify(const LinearSvmModel& model, const std::vector<double>& vector) {
  return model.classes[classify_index(model, vector)];
}

double accuracy(const LinearSvmModel& model, const std::vector<EmbeddingRecord>& records) {
  if (records.empty()) raise(ErrorKind::kContract, "accuracy: no records");
  std::size_t hits = 0;
  for (const auto& r : records) hits += classify(model, r.vector) == r.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

}  // namespace treegcn
