#include "treegcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "treegcn/error.hpp"
#include "treegcn/rng.hpp"

namespace treegcn {

namespace {

std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

std::string list_string(const std::vector<std::size_t>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + ")";
}

std::string enc_prefix(std::size_t layer) { return "encoder." + std::to_string(layer); }
std::string dec_prefix(std::size_t layer) { return "decoder." + std::to_string(layer); }

void add_conv_schema(std::vector<std::pair<std::string, Shape>>& schema, const std::string& prefix,
                     std::size_t width, std::size_t support, const std::vector<std::size_t>& ancestor_widths) {
  schema.push_back({prefix + ".conv.loop_expand", {width, support * width}});
  schema.push_back({prefix + ".conv.loop_project", {support * width, width}});
  for (std::size_t a = 0; a < ancestor_widths.size(); ++a) {
    schema.push_back({prefix + ".conv.ancestor." + std::to_string(a), {ancestor_widths[a], width}});
  }
  schema.push_back({prefix + ".conv.bias", {width}});
}

}  // namespace

// ---- ModelConfig ---------------------------------------------------------------

std::size_t ModelConfig::point_count() const { return product(encoder_degrees); }

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { raise(ErrorKind::kConfig, "model config: " + msg); };
  if (encoder_degrees.empty() || decoder_degrees.empty()) fail("degree lists must be non-empty");
  for (std::size_t d : encoder_degrees) {
    if (d < 1) fail("encoder degrees must be >= 1");
  }
  for (std::size_t d : decoder_degrees) {
    if (d < 1) fail("decoder degrees must be >= 1");
  }
  if (product(encoder_degrees) != product(decoder_degrees)) {
    fail("encoder degrees " + list_string(encoder_degrees) + " and decoder degrees " +
         list_string(decoder_degrees) + " yield different point counts");
  }
  if (encoder_widths.size() != encoder_degrees.size() + 1) fail("encoder_widths needs one entry per layer plus one");
  if (decoder_widths.size() != decoder_degrees.size() + 1) fail("decoder_widths needs one entry per layer plus one");
  if (encoder_widths.front() != 3 || decoder_widths.back() != 3) fail("cloud-side widths must be 3");
  if (encoder_widths.back() != embedding_dim || decoder_widths.front() != embedding_dim) {
    fail("embedding-side widths must equal embedding_dim " + std::to_string(embedding_dim));
  }
  for (std::size_t w : encoder_widths) {
    if (w < 1) fail("widths must be positive");
  }
  for (std::size_t w : decoder_widths) {
    if (w < 1) fail("widths must be positive");
  }
  if (!(activation_slope > 0.0 && activation_slope < 1.0)) fail("activation_slope must lie in (0, 1)");
  if (loop_support < 1) fail("loop_support must be >= 1");
}

ModelConfig ModelConfig::full(std::size_t embedding_dim) {
  ModelConfig c;
  c.encoder_degrees = {64, 2, 2, 2, 2, 2};
  c.encoder_widths = {3, 64, 128, 128, 256, 256, embedding_dim};
  c.decoder_degrees = {1, 2, 2, 2, 2, 2, 64};
  c.decoder_widths = {embedding_dim, 256, 256, 128, 128, 64, 64, 3};
  c.embedding_dim = embedding_dim;
  c.activation_slope = 0.2;
  c.loop_support = 10;
  return c;
}

ModelConfig ModelConfig::toy(std::size_t embedding_dim) {
  ModelConfig c;
  c.encoder_degrees = {4, 8, 8};
  c.encoder_widths = {3, 32, 64, embedding_dim};
  c.decoder_degrees = {8, 8, 4};
  c.decoder_widths = {embedding_dim, 64, 32, 3};
  c.embedding_dim = embedding_dim;
  c.activation_slope = 0.2;
  c.loop_support = 2;
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder_degrees", encoder_degrees}, {"encoder_widths", encoder_widths},
          {"decoder_degrees", decoder_degrees}, {"decoder_widths", decoder_widths},
          {"embedding_dim", embedding_dim},     {"activation_slope", activation_slope},
          {"loop_support", loop_support}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  static const char* const kKeys[] = {"encoder_degrees", "encoder_widths", "decoder_degrees", "decoder_widths",
                                      "embedding_dim",   "activation_slope", "loop_support"};
  if (!j.is_object()) raise(ErrorKind::kConfig, "model config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      raise(ErrorKind::kConfig, "model config: unknown key '" + key + "'");
    }
  }
  ModelConfig c;
  try {
    c.encoder_degrees = j.at("encoder_degrees").get<std::vector<std::size_t>>();
    c.encoder_widths = j.at("encoder_widths").get<std::vector<std::size_t>>();
    c.decoder_degrees = j.at("decoder_degrees").get<std::vector<std::size_t>>();
    c.decoder_widths = j.at("decoder_widths").get<std::vector<std::size_t>>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.activation_slope = j.value("activation_slope", 0.2);
    c.loop_support = j.value("loop_support", std::size_t{10});
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kConfig, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- Layer operations ------------------------------------------------------------

LayerState down_branch(Tape& tape, const LayerState& state, std::size_t degree, const BranchParams& params) {
  const std::size_t n = state.nodes.rows();
  if (degree == 0 || n % degree != 0) {
    raise(ErrorKind::kShape, "down_branch: " + std::to_string(n) + " nodes not divisible by degree " +
                                 std::to_string(degree));
  }
  const Tensor mapped = add_row_bias(tape, matmul(tape, state.nodes, params.weight), params.bias);
  LayerState next;
  next.nodes = group_max(tape, mapped, degree);
  next.ancestors.reserve(state.ancestors.size() + 1);
  for (const Ancestor& a : state.ancestors) {
    if (a.fanout % degree == 0) {
      next.ancestors.push_back({a.features, a.fanout / degree});
    } else if (a.fanout == 1) {
      next.ancestors.push_back({group_max(tape, a.features, degree), 1});
    } else {
      raise(ErrorKind::kShape, "down_branch: ancestor fanout " + std::to_string(a.fanout) +
                                   " incompatible with degree " + std::to_string(degree));
    }
  }
  next.ancestors.push_back({next.nodes, 1});
  return next;
}

LayerState up_branch(Tape& tape, const LayerState& state, std::size_t degree, const BranchParams& params) {
  if (degree == 0) raise(ErrorKind::kShape, "up_branch: degree must be positive");
  const std::size_t n = state.nodes.rows();
  std::vector<Tensor> parts{state.nodes};
  for (const Ancestor& a : state.ancestors) parts.push_back(repeat_rows(tape, a.features, a.fanout));
  const Tensor joined = parts.size() == 1 ? state.nodes : concat_cols(tape, parts);
  const Tensor expanded = add_row_bias(tape, matmul(tape, joined, params.weight), params.bias);
  if (expanded.cols() % degree != 0) {
    raise(ErrorKind::kShape, "up_branch: output width " + std::to_string(expanded.cols()) +
                                 " not divisible by degree " + std::to_string(degree));
  }
  LayerState next;
  next.nodes = reshape(tape, expanded, {n * degree, expanded.cols() / degree});
  next.ancestors.reserve(state.ancestors.size() + 1);
  for (const Ancestor& a : state.ancestors) next.ancestors.push_back({a.features, a.fanout * degree});
  next.ancestors.push_back({state.nodes, degree});
  return next;
}

LayerState graph_conv(Tape& tape, const LayerState& state, const GraphConvParams& params,
                      std::optional<double> slope) {
  if (params.ancestor_weights.size() != state.ancestors.size()) {
    raise(ErrorKind::kShape, "graph_conv: " + std::to_string(state.ancestors.size()) + " ancestors but " +
                                 std::to_string(params.ancestor_weights.size()) + " ancestor weights");
  }
  Tensor sum = matmul(tape, matmul(tape, state.nodes, params.loop_expand), params.loop_project);
  for (std::size_t a = 0; a < state.ancestors.size(); ++a) {
    const Ancestor& anc = state.ancestors[a];
    const Tensor term = matmul(tape, anc.features, params.ancestor_weights[a]);
    sum = add(tape, sum, repeat_rows(tape, term, anc.fanout));
  }
  sum = add_row_bias(tape, sum, params.bias);
  LayerState next;
  next.nodes = slope ? leaky_relu(tape, sum, *slope) : sum;
  next.ancestors = state.ancestors;
  return next;
}

// ---- Model ---------------------------------------------------------------------

std::vector<std::pair<std::string, Shape>> parameter_schema(const ModelConfig& config) {
  config.validate();
  std::vector<std::pair<std::string, Shape>> schema;
  const std::size_t k = config.loop_support;

  std::vector<std::size_t> ancestor_widths;
  for (std::size_t l = 0; l < config.encoder_degrees.size(); ++l) {
    const std::size_t in = config.encoder_widths[l], out = config.encoder_widths[l + 1];
    const std::string p = enc_prefix(l);
    schema.push_back({p + ".branch.weight", {in, out}});
    schema.push_back({p + ".branch.bias", {out}});
    ancestor_widths.push_back(out);
    add_conv_schema(schema, p, out, k, ancestor_widths);
  }

  ancestor_widths.clear();
  for (std::size_t l = 0; l < config.decoder_degrees.size(); ++l) {
    const std::size_t in = config.decoder_widths[l], out = config.decoder_widths[l + 1];
    const std::size_t d = config.decoder_degrees[l];
    const std::size_t joined = in + std::accumulate(ancestor_widths.begin(), ancestor_widths.end(), std::size_t{0});
    const std::string p = dec_prefix(l);
    schema.push_back({p + ".branch.weight", {joined, d * out}});
    schema.push_back({p + ".branch.bias", {d * out}});
    ancestor_widths.push_back(in);
    add_conv_schema(schema, p, out, k, ancestor_widths);
  }
  return schema;
}

TreeGcnModel::TreeGcnModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  Rng rng = Rng::stream(seed, "init");
  for (auto& [name, shape] : parameter_schema(config_)) {
    Tensor t = Tensor::zeros(shape, true);
    if (shape.size() == 2) {
      const double s = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      for (double& v : t.mutable_data()) v = rng.uniform(-s, s);
    }
    parameters_.push_back({name, t});
  }
}

TreeGcnModel::TreeGcnModel(ModelConfig config, std::vector<NamedTensor> parameters)
    : config_(std::move(config)), parameters_(std::move(parameters)) {
  const auto schema = parameter_schema(config_);
  if (schema.size() != parameters_.size()) {
    raise(ErrorKind::kFormat, "expected " + std::to_string(schema.size()) + " parameters, got " +
                                  std::to_string(parameters_.size()));
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].first != parameters_[i].name || schema[i].second != parameters_[i].tensor.shape()) {
      raise(ErrorKind::kFormat, "parameter " + std::to_string(i) + " is " + parameters_[i].name +
                                    shape_string(parameters_[i].tensor.shape()) + ", expected " + schema[i].first +
                                    shape_string(schema[i].second));
    }
    parameters_[i].tensor.set_requires_grad(true);
  }
}

std::vector<Tensor> TreeGcnModel::parameter_tensors() const {
  std::vector<Tensor> out;
  out.reserve(parameters_.size());
  for (const auto& p : parameters_) out.push_back(p.tensor);
  return out;
}

const Tensor& TreeGcnModel::parameter(const std::string& name) const {
  for (const auto& p : parameters_) {
    if (p.name == name) return p.tensor;
  }
  raise(ErrorKind::kContract, "no parameter named " + name);
}

void TreeGcnModel::zero_grad() {
  for (auto& p : parameters_) p.tensor.zero_grad();
}

BranchParams TreeGcnModel::branch(const std::string& prefix) const {
  return {parameter(prefix + ".branch.weight"), parameter(prefix + ".branch.bias")};
}

GraphConvParams TreeGcnModel::conv(const std::string& prefix, std::size_t depth) const {
  GraphConvParams p;
  p.loop_expand = parameter(prefix + ".conv.loop_expand");
  p.loop_project = parameter(prefix + ".conv.loop_project");
  for (std::size_t a = 0; a < depth; ++a) {
    p.ancestor_weights.push_back(parameter(prefix + ".conv.ancestor." + std::to_string(a)));
  }
  p.bias = parameter(prefix + ".conv.bias");
  return p;
}

Tensor TreeGcnModel::encode(Tape& tape, const Tensor& cloud) const {
  const std::size_t n = config_.point_count();
  if (cloud.rank() != 2 || cloud.rows() != n || cloud.cols() != 3) {
    raise(ErrorKind::kShape, "encode: expected a [" + std::to_string(n) + "x3] cloud, got " +
                                 shape_string(cloud.shape()));
  }
  LayerState state{cloud, {}};
  for (std::size_t l = 0; l < config_.encoder_degrees.size(); ++l) {
    state = down_branch(tape, state, config_.encoder_degrees[l], branch(enc_prefix(l)));
    state = graph_conv(tape, state, conv(enc_prefix(l), l + 1), config_.activation_slope);
  }
  return state.nodes;
}

Tensor TreeGcnModel::decode(Tape& tape, const Tensor& embedding) const {
  const std::size_t psi = config_.embedding_dim;
  if (embedding.size() != psi || (embedding.rank() == 2 && embedding.rows() != 1) || embedding.rank() > 2) {
    raise(ErrorKind::kShape, "decode: expected an embedding of dimension " + std::to_string(psi) + ", got " +
                                 shape_string(embedding.shape()));
  }
  LayerState state{embedding.rank() == 2 ? embedding : reshape(tape, embedding, {1, psi}), {}};
  const std::size_t layers = config_.decoder_degrees.size();
  for (std::size_t l = 0; l < layers; ++l) {
    state = up_branch(tape, state, config_.decoder_degrees[l], branch(dec_prefix(l)));
    std::optional<double> slope;
    if (l + 1 < layers) slope = config_.activation_slope;
    state = graph_conv(tape, state, conv(dec_prefix(l), l + 1), slope);
  }
  return state.nodes;
}

std::vector<double> TreeGcnModel::embed(const PointCloud& cloud) const {
  Tape tape = Tape::inference();
  const Tensor z = encode(tape, cloud.to_tensor());
  return {z.data().begin(), z.data().end()};
}

PointCloud TreeGcnModel::generate(const std::vector<double>& embedding) const {
  Tape tape = Tape::inference();
  return PointCloud::from_tensor(decode(tape, Tensor({embedding.size()}, embedding)));
}

PointCloud TreeGcnModel::reconstruct(const PointCloud& cloud) const {
  Tape tape = Tape::inference();
  PointCloud out = PointCloud::from_tensor(decode(tape, encode(tape, cloud.to_tensor())));
  out.label = cloud.label;
  return out;
}

}  // namespace treegcn
