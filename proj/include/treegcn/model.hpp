#pragma once

// Tree-structured graph-convolution autoencoder.
//
// The encoder turns an [N x 3] cloud into a single embedding row by
// alternating down-branching (shared affine map + max over contiguous sibling
// blocks) with graph convolution. The decoder mirrors it: up-branching expands
// every node into `degree` children from the node feature concatenated with
// its ancestors, followed by graph convolution.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "treegcn/mesh_io.hpp"
#include "treegcn/tensor.hpp"

namespace treegcn {

struct ModelConfig {
  std::vector<std::size_t> encoder_degrees;  // leaf -> root
  std::vector<std::size_t> encoder_widths;   // 3 -> embedding_dim, degrees.size() + 1 entries
  std::vector<std::size_t> decoder_degrees;  // root -> leaf
  std::vector<std::size_t> decoder_widths;   // embedding_dim -> 3, degrees.size() + 1 entries
  std::size_t embedding_dim = 512;
  double activation_slope = 0.2;
  std::size_t loop_support = 10;

  // Product of the encoder degrees.
  std::size_t point_count() const;

  // Throws kConfig on any inconsistency.
  void validate() const;

  // 2048-point schedule: encoder (64,2,2,2,2,2), decoder (1,2,2,2,2,2,64).
  static ModelConfig full(std::size_t embedding_dim);
  // 256 points, encoder (4,8,8) / decoder (8,8,4).
  static ModelConfig toy(std::size_t embedding_dim);

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Ancestor features stored at the resolution they were produced. Each row
// stands for `fanout` consecutive nodes of the current layer.
struct Ancestor {
  Tensor features;
  std::size_t fanout = 1;
};

struct LayerState {
  Tensor nodes;                     // [N_l x F_l]
  std::vector<Ancestor> ancestors;  // oldest first; size == depth
};

struct BranchParams {
  Tensor weight;
  Tensor bias;
};

struct GraphConvParams {
  Tensor loop_expand;                    // [F x K*F]
  Tensor loop_project;                   // [K*F x F']
  std::vector<Tensor> ancestor_weights;  // one [F_a x F'] per ancestor depth
  Tensor bias;                           // [F']
};

// Affine map per node, then max over each block of `degree` siblings. Existing
// ancestors are pooled alongside and the pooled feature becomes the newest
// ancestor.
LayerState down_branch(Tape& tape, const LayerState& state, std::size_t degree, const BranchParams& params);

// Node feature joined with its ancestors -> `degree` children. Children
// inherit the parent's ancestors plus the parent feature.
LayerState up_branch(Tape& tape, const LayerState& state, std::size_t degree, const BranchParams& params);

// h'_i = act(loop(h_i) + sum_a U_a h_a + b); `slope` unset means linear output.
LayerState graph_conv(Tape& tape, const LayerState& state, const GraphConvParams& params,
                      std::optional<double> slope);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Parameter names and shapes in canonical order.
std::vector<std::pair<std::string, Shape>> parameter_schema(const ModelConfig& config);

class TreeGcnModel {
 public:
  // Fresh parameters: uniform(-s, s), s = sqrt(6 / (fan_in + fan_out)); zero biases.
  TreeGcnModel(ModelConfig config, std::uint64_t seed);
  // Adopts existing parameters; names and shapes must match the schema.
  TreeGcnModel(ModelConfig config, std::vector<NamedTensor> parameters);

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<NamedTensor>& parameters() noexcept { return parameters_; }
  const std::vector<NamedTensor>& parameters() const noexcept { return parameters_; }
  std::vector<Tensor> parameter_tensors() const;
  const Tensor& parameter(const std::string& name) const;
  void zero_grad();

  // [N x 3] -> [1 x embedding_dim].
  Tensor encode(Tape& tape, const Tensor& cloud) const;
  // [1 x embedding_dim] (or rank-1) -> [N x 3].
  Tensor decode(Tape& tape, const Tensor& embedding) const;

  // Inference helpers; safe to call concurrently on a shared model.
  std::vector<double> embed(const PointCloud& cloud) const;
  PointCloud generate(const std::vector<double>& embedding) const;
  PointCloud reconstruct(const PointCloud& cloud) const;

 private:
  BranchParams branch(const std::string& prefix) const;
  GraphConvParams conv(const std::string& prefix, std::size_t depth) const;

  ModelConfig config_;
  std::vector<NamedTensor> parameters_;
};

}  // namespace treegcn
