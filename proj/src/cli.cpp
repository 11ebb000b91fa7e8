#include "treegcn/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "treegcn/analysis.hpp"
#include "treegcn/checkpoint.hpp"
#include "treegcn/error.hpp"
#include "treegcn/metrics.hpp"
#include "treegcn/rng.hpp"

namespace treegcn {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) raise(ErrorKind::kIo, "short write to " + path.string());
}

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

bool is_cloud_file(const fs::path& p) {
  const std::string e = lower_ext(p);
  return e == ".pcf" || e == ".xyz" || e == ".txt";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_point_count(const CloudSet& set, const ModelConfig& config) {
  for (std::size_t i = 0; i < set.clouds.size(); ++i) {
    if (set.clouds[i].size() != config.point_count()) {
      raise(ErrorKind::kContract, "cloud '" + set.ids[i] + "' has " + std::to_string(set.clouds[i].size()) +
                                      " points but the checkpoint expects " + std::to_string(config.point_count()));
    }
  }
}

Checkpoint load_ckpt(const fs::path& path) { return load_checkpoint(path); }

// ---- Subcommands -------------------------------------------------------------------

struct SampleArgs {
  std::string mesh_dir, out;
  std::size_t n = kDefaultSampleCount;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(a.mesh_dir)) raise(ErrorKind::kIo, "mesh directory not found: " + a.mesh_dir);
  std::vector<fs::path> meshes;
  for (const auto& entry : fs::recursive_directory_iterator(a.mesh_dir)) {
    const std::string e = lower_ext(entry.path());
    if (entry.is_regular_file() && (e == ".off" || e == ".obj")) meshes.push_back(entry.path());
  }
  std::sort(meshes.begin(), meshes.end());
  if (meshes.empty()) raise(ErrorKind::kIo, "no .off/.obj meshes under " + a.mesh_dir);

  fs::create_directories(a.out);
  std::vector<std::string> ids, labels, files;
  for (std::size_t i = 0; i < meshes.size(); ++i) {
    const fs::path rel = fs::relative(meshes[i], a.mesh_dir);
    std::string id = rel.parent_path().empty() ? rel.stem().string() : (rel.parent_path() / rel.stem()).string();
    std::replace(id.begin(), id.end(), '/', '_');
    const std::string label = rel.parent_path().empty() ? "" : rel.begin()->string();
    try {
      const Mesh mesh = load_mesh(meshes[i]);
      PointCloud cloud = normalize(sample_surface(mesh, a.n, Rng::stream(a.seed, "sampling", i).next_u64()));
      const std::string file = id + ".pcf";
      write_cloud(cloud, fs::path(a.out) / file);
      ids.push_back(id);
      labels.push_back(label);
      files.push_back(file);
    } catch (const Error& e) {
      err << "skipping " << meshes[i].string() << ": " << e.what() << '\n';
    }
  }
  if (ids.empty()) raise(ErrorKind::kFormat, "every mesh failed to load");
  write_manifest(fs::path(a.out) / "manifest.csv", ids, labels, files);
  out << "sampled," << ids.size() << '\n';
  return kExitOk;
}

struct SynthArgs {
  std::string classes = "sphere,box,cylinder,cone";
  std::size_t per_class = 10;
  std::size_t n = kDefaultSampleCount;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  std::vector<ShapeClass> classes;
  for (const std::string& name : split_csv(a.classes)) classes.push_back(shape_class_from_string(name));
  if (classes.empty() || a.per_class == 0) raise(ErrorKind::kUsage, "need at least one class and instance");
  fs::create_directories(a.out);
  std::vector<std::string> ids, labels, files;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t i = 0; i < a.per_class; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%04zu", std::string(to_string(classes[c])).c_str(), i);
      const std::uint64_t seed = Rng::stream(a.seed, "synthetic", (c << 32) | i).next_u64();
      const PointCloud cloud = make_synthetic_cloud(classes[c], a.n, seed);
      const std::string file = std::string(id) + ".pcf";
      write_cloud(cloud, fs::path(a.out) / file);
      ids.emplace_back(id);
      labels.emplace_back(to_string(classes[c]));
      files.push_back(file);
    }
  }
  write_manifest(fs::path(a.out) / "manifest.csv", ids, labels, files);
  out << "generated," << ids.size() << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string config, resume, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, max_steps;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(a.config));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (a.seed) j["seed"] = *a.seed;
  if (!a.out.empty()) j["output_dir"] = fs::absolute(a.out).string();
  if (a.epochs || a.max_steps) {
    if (!j.contains("train")) j["train"] = nlohmann::json::object();
    if (a.epochs) j["train"]["epochs"] = *a.epochs;
    if (a.max_steps) j["train"]["max_steps"] = *a.max_steps;
  }
  RunConfig run = RunConfig::from_json(j, fs::path(a.config).parent_path());
  const CloudSet data = load_cloud_set(run.dataset);
  require_point_count(data, run.model);

  TrainConfig tc = run.train;
  tc.checkpoint_dir = run.output_dir / "checkpoints";
  std::optional<TreeGcnModel> model;
  std::optional<OptimizerState> resume_state;
  if (!a.resume.empty()) {
    Checkpoint ckpt = load_ckpt(a.resume);
    if (!(ckpt.config == run.model)) raise(ErrorKind::kConfig, "resume checkpoint does not match the model config");
    model.emplace(ckpt.to_model());
    resume_state = ckpt.optimizer;
  } else {
    model.emplace(run.model, run.seed);
  }
  err << "training " << data.clouds.size() << " clouds, regime " << to_string(tc.regime) << ", mode "
      << to_string(tc.mode) << '\n';
  const TrainResult result = train(data.clouds, *model, tc, resume_state ? &*resume_state : nullptr);

  fs::create_directories(run.output_dir);
  write_text(run.output_dir / "loss.csv", loss_history_csv(result.history));
  nlohmann::json summary = {{"final_loss", result.final_loss},
                            {"steps", result.steps},
                            {"epoch_means", result.epoch_means},
                            {"train", tc.to_json()},
                            {"model", run.model.to_json()}};
  if (run.validation) {
    const CloudSet val = load_cloud_set(*run.validation);
    require_point_count(val, run.model);
    summary["validation_loss"] = mean_reconstruction_loss(*model, val.clouds);
    out << "validation_loss," << fmt(summary["validation_loss"].get<double>()) << '\n';
  }
  write_text(run.output_dir / "summary.json", summary.dump(2) + "\n");
  out << "final_loss," << fmt(result.final_loss) << '\n';
  out << "steps," << result.steps << '\n';
  return kExitOk;
}

int cmd_encode(const std::string& ckpt_path, const std::string& clouds, const std::string& out_path,
               std::ostream& out) {
  const Checkpoint ckpt = load_ckpt(ckpt_path);
  const CloudSet set = load_cloud_set(clouds);
  require_point_count(set, ckpt.config);
  const TreeGcnModel model = ckpt.to_model();
  const std::size_t n = export_embeddings(set.clouds, set.ids, model, out_path);
  out << "encoded," << n << '\n';
  return kExitOk;
}

int cmd_decode(const std::string& ckpt_path, const std::string& embeddings, const std::string& out_dir,
               const std::string& format, std::ostream& out) {
  const Checkpoint ckpt = load_ckpt(ckpt_path);
  const TreeGcnModel model = ckpt.to_model();
  const auto records = parse_embeddings_csv(read_text(embeddings));
  fs::create_directories(out_dir);
  for (const auto& r : records) {
    if (r.vector.size() != ckpt.config.embedding_dim) {
      raise(ErrorKind::kContract, "embedding '" + r.id + "' has dimension " + std::to_string(r.vector.size()) +
                                      " but the checkpoint expects " + std::to_string(ckpt.config.embedding_dim));
    }
    write_cloud(model.generate(r.vector), fs::path(out_dir) / (r.id + "." + format));
  }
  out << "decoded," << records.size() << '\n';
  return kExitOk;
}

int cmd_recon(const std::string& ckpt_path, const std::string& clouds, const std::string& out_dir,
              const std::string& format, std::ostream& out) {
  const Checkpoint ckpt = load_ckpt(ckpt_path);
  const CloudSet set = load_cloud_set(clouds);
  require_point_count(set, ckpt.config);
  const TreeGcnModel model = ckpt.to_model();
  fs::create_directories(out_dir);
  const auto records = encode_all(model, set.clouds, set.ids);
  std::vector<std::string> labels, files;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string file = set.ids[i] + "." + format;
    write_cloud(model.generate(records[i].vector), fs::path(out_dir) / file);
    labels.push_back(records[i].label);
    files.push_back(file);
  }
  write_manifest(fs::path(out_dir) / "manifest.csv", set.ids, labels, files);
  out << "reconstructed," << records.size() << '\n';
  return kExitOk;
}

int cmd_interp(const std::string& ckpt_path, const std::string& from, const std::string& to, std::size_t steps,
               const std::string& out_dir, std::ostream& out) {
  const Checkpoint ckpt = load_ckpt(ckpt_path);
  const TreeGcnModel model = ckpt.to_model();
  CloudSet a = load_cloud_set(from), b = load_cloud_set(to);
  if (a.clouds.size() != 1 || b.clouds.size() != 1) raise(ErrorKind::kUsage, "--from and --to must name one cloud each");
  require_point_count(a, ckpt.config);
  require_point_count(b, ckpt.config);
  const auto frames = interpolate(model.embed(a.clouds[0]), model.embed(b.clouds[0]), steps, model);
  write_frames(frames, out_dir);
  out << "frames," << frames.size() << '\n';
  return kExitOk;
}

int cmd_complete(const std::string& ckpt_path, const std::string& clouds, const std::string& out_dir,
                 std::uint64_t seed, const std::string& format, std::ostream& out) {
  const Checkpoint ckpt = load_ckpt(ckpt_path);
  const CloudSet set = load_cloud_set(clouds);
  require_point_count(set, ckpt.config);
  const TreeGcnModel model = ckpt.to_model();
  fs::create_directories(fs::path(out_dir) / "partial");
  double total = 0.0;
  for (std::size_t i = 0; i < set.clouds.size(); ++i) {
    const PointCloud partial = make_partial(set.clouds[i], Rng::stream(seed, "cropping", i).next_u64());
    const PointCloud completed = model.reconstruct(partial);
    write_cloud(partial, fs::path(out_dir) / "partial" / (set.ids[i] + "." + format));
    write_cloud(completed, fs::path(out_dir) / (set.ids[i] + "." + format));
    const double cd = chamfer(completed, set.clouds[i]);
    total += cd;
    out << set.ids[i] << ',' << fmt(cd) << '\n';
  }
  out << "mean," << fmt(total / static_cast<double>(set.clouds.size())) << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string metric, a, b;
  std::optional<std::size_t> k;
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  if (args.metric == "tcd" && !args.k) {
    raise(ErrorKind::kUsage, "--metric tcd requires --k (use 2025 for the 2048-vs-2025 protocol)");
  }
  const CloudSet a = load_cloud_set(args.a), b = load_cloud_set(args.b);
  if (args.metric == "fpd") {
    out << "name,value\n" << "fpd," << fmt(fpd(a.clouds, b.clouds)) << '\n';
    return kExitOk;
  }
  // Pair by id when every id of `a` appears in `b`, otherwise by position.
  std::map<std::string, std::size_t> by_id;
  for (std::size_t j = 0; j < b.ids.size(); ++j) by_id[b.ids[j]] = j;
  const bool by_name = std::all_of(a.ids.begin(), a.ids.end(), [&](const auto& id) { return by_id.count(id) != 0; });
  if (!by_name && a.clouds.size() != b.clouds.size()) {
    raise(ErrorKind::kContract, "cannot pair " + std::to_string(a.clouds.size()) + " clouds with " +
                                    std::to_string(b.clouds.size()));
  }
  out << "name,value\n";
  double total = 0.0;
  for (std::size_t i = 0; i < a.clouds.size(); ++i) {
    const PointCloud& other = b.clouds[by_name ? by_id[a.ids[i]] : i];
    const double v = args.metric == "cd" ? chamfer(a.clouds[i], other) : truncated_chamfer(a.clouds[i], other, *args.k);
    total += v;
    out << a.ids[i] << ',' << fmt(v) << '\n';
  }
  out << "mean," << fmt(total / static_cast<double>(a.clouds.size())) << '\n';
  return kExitOk;
}

}  // namespace

// ---- Public helpers --------------------------------------------------------------------

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig: return kExitUsage;
    case ErrorKind::kNumeric: return kExitNumeric;
    default: return kExitData;
  }
}

CloudSet load_cloud_set(const fs::path& path) {
  CloudSet set;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && is_cloud_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      set.ids.push_back(f.stem().string());
      set.clouds.push_back(read_cloud(f));
    }
  } else if (lower_ext(path) == ".csv") {
    std::istringstream in(read_text(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto fields = split_csv(line);
      if (line_no == 1) {
        if (fields.size() != 3 || fields[0] != "id" || fields[1] != "label" || fields[2] != "path") {
          raise(ErrorKind::kFormat, "manifest " + path.string() + ": header must be id,label,path");
        }
        continue;
      }
      if (fields.size() != 3) raise(ErrorKind::kFormat, "manifest line " + std::to_string(line_no) + ": expected 3 fields");
      PointCloud cloud = read_cloud(path.parent_path() / fields[2]);
      if (!fields[1].empty()) cloud.label = fields[1];
      set.ids.push_back(fields[0]);
      set.clouds.push_back(std::move(cloud));
    }
  } else if (fs::is_regular_file(path)) {
    set.ids.push_back(path.stem().string());
    set.clouds.push_back(read_cloud(path));
  } else {
    raise(ErrorKind::kIo, "cloud source not found: " + path.string());
  }
  if (set.clouds.empty()) raise(ErrorKind::kFormat, "no clouds found in " + path.string());
  return set;
}

void write_manifest(const fs::path& path, const std::vector<std::string>& ids, const std::vector<std::string>& labels,
                    const std::vector<std::string>& files) {
  std::string text = "id,label,path\n";
  for (std::size_t i = 0; i < ids.size(); ++i) text += ids[i] + ',' + labels[i] + ',' + files[i] + '\n';
  write_text(path, text);
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  static const char* const kKeys[] = {"model", "train", "dataset", "validation", "output_dir", "seed"};
  if (!j.is_object()) raise(ErrorKind::kConfig, "run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      raise(ErrorKind::kConfig, "run config: unknown key '" + key + "'");
    }
  }
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  RunConfig run;
  try {
    run.train = TrainConfig::from_json(j.value("train", nlohmann::json::object()));
    if (j.contains("seed")) run.seed = j.at("seed").get<std::uint64_t>();
    run.train.seed = run.seed;
    const nlohmann::json model = j.value("model", nlohmann::json{{"preset", "toy"}});
    std::size_t psi = regime_spec(run.train.regime).embedding_dim;
    if (model.contains("preset")) {
      for (const auto& [key, value] : model.items()) {
        if (key != "preset" && key != "embedding_dim") {
          raise(ErrorKind::kConfig, "model: '" + key + "' cannot be combined with 'preset'");
        }
      }
      if (model.contains("embedding_dim")) psi = model.at("embedding_dim").get<std::size_t>();
      if (psi == 0) raise(ErrorKind::kConfig, "model: regime 'custom' needs an explicit embedding_dim");
      const std::string preset = model.at("preset").get<std::string>();
      if (preset == "toy") {
        run.model = ModelConfig::toy(psi);
      } else if (preset == "full") {
        run.model = ModelConfig::full(psi);
      } else {
        raise(ErrorKind::kConfig, "model: unknown preset '" + preset + "'");
      }
    } else {
      run.model = ModelConfig::from_json(model);
    }
    if (!j.contains("dataset")) raise(ErrorKind::kConfig, "run config: 'dataset' is required");
    run.dataset = resolve(j.at("dataset").get<std::string>());
    if (j.contains("validation")) run.validation = resolve(j.at("validation").get<std::string>());
    run.output_dir = resolve(j.value("output_dir", std::string("run")));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kConfig, std::string("run config: ") + e.what());
  }
  run.model.validate();
  run.train.validate(run.model);
  if (!fs::exists(run.dataset)) raise(ErrorKind::kConfig, "dataset path does not exist: " + run.dataset.string());
  if (run.validation && !fs::exists(*run.validation)) {
    raise(ErrorKind::kConfig, "validation path does not exist: " + run.validation->string());
  }
  return run;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tree-structured graph-convolution point-cloud autoencoder"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  SampleArgs sample;
  auto* s = app.add_subcommand("sample", "Sample normalized point clouds from OFF/OBJ meshes");
  s->add_option("--mesh-dir", sample.mesh_dir, "Directory of meshes (subdirectories become labels)")->required();
  s->add_option("--out", sample.out, "Output directory for .pcf clouds and manifest.csv")->required();
  s->add_option("--n", sample.n, "Points per cloud");
  s->add_option("--seed", sample.seed, "Random seed");

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Generate a labelled synthetic dataset");
  sy->add_option("--classes", synth.classes, "Comma-separated shape classes (sphere,box,cylinder,cone)");
  sy->add_option("--per-class", synth.per_class, "Instances per class");
  sy->add_option("--n", synth.n, "Points per cloud");
  sy->add_option("--out", synth.out, "Output directory")->required();
  sy->add_option("--seed", synth.seed, "Random seed");

  TrainArgs train_args;
  std::uint64_t seed_override = 0;
  std::size_t epochs_override = 0, steps_override = 0;
  auto* tr = app.add_subcommand("train", "Train the autoencoder from a JSON run config");
  tr->add_option("--config", train_args.config, "Run config JSON")->required();
  tr->add_option("--resume", train_args.resume, "Checkpoint to resume from (parameters + optimizer state)");
  tr->add_option("--out", train_args.out, "Override output_dir");
  auto* seed_opt = tr->add_option("--seed", seed_override, "Override seed");
  auto* epochs_opt = tr->add_option("--epochs", epochs_override, "Override train.epochs");
  auto* steps_opt = tr->add_option("--max-steps", steps_override, "Override train.max_steps");
  for (auto* o : {seed_opt, epochs_opt, steps_opt}) o->default_str("");

  std::string ckpt, clouds, out_path, embeddings, from, to, format = "xyz";
  std::size_t steps = 8;
  std::uint64_t seed = 0;
  auto* en = app.add_subcommand("encode", "Write embeddings CSV (id,label,v0..) for a cloud set");
  en->add_option("--ckpt", ckpt, "Checkpoint")->required();
  en->add_option("--clouds", clouds, "Cloud directory, manifest CSV or single cloud")->required();
  en->add_option("--out", out_path, "Output CSV")->required();

  auto* de = app.add_subcommand("decode", "Decode embeddings CSV rows into clouds");
  de->add_option("--ckpt", ckpt, "Checkpoint")->required();
  de->add_option("--embeddings", embeddings, "Embeddings CSV")->required();
  de->add_option("--out", out_path, "Output directory")->required();
  de->add_option("--format", format, "Output format: xyz (full precision ASCII) or pcf")->check(CLI::IsMember({"xyz", "pcf"}));

  auto* re = app.add_subcommand("recon", "Reconstruct clouds through encode + decode");
  re->add_option("--ckpt", ckpt, "Checkpoint")->required();
  re->add_option("--clouds", clouds, "Cloud directory, manifest CSV or single cloud")->required();
  re->add_option("--out", out_path, "Output directory")->required();
  re->add_option("--format", format, "Output format: xyz (full precision ASCII) or pcf")->check(CLI::IsMember({"xyz", "pcf"}));

  auto* in = app.add_subcommand("interp", "Decode a linear path between two embeddings");
  in->add_option("--ckpt", ckpt, "Checkpoint")->required();
  in->add_option("--from", from, "Source cloud")->required();
  in->add_option("--to", to, "Target cloud")->required();
  in->add_option("--steps", steps, "Number of frames (>= 2)");
  in->add_option("--out", out_path, "Output directory for frame_XXXX.pcf")->required();

  auto* co = app.add_subcommand("complete", "Crop clouds with a random half-space and reconstruct them");
  co->add_option("--ckpt", ckpt, "Checkpoint")->required();
  co->add_option("--clouds", clouds, "Cloud directory, manifest CSV or single cloud")->required();
  co->add_option("--out", out_path, "Output directory")->required();
  co->add_option("--seed", seed, "Cropping seed");
  co->add_option("--format", format, "Output format: xyz (full precision ASCII) or pcf")->check(CLI::IsMember({"xyz", "pcf"}));

  EvalArgs eval;
  std::size_t k = kTruncatedChamferK;
  auto* ev = app.add_subcommand("eval", "Compare two cloud sets; prints name,value CSV");
  ev->add_option("--metric", eval.metric, "cd | tcd | fpd")->required()->check(CLI::IsMember({"cd", "tcd", "fpd"}));
  ev->add_option("--a", eval.a, "First cloud set")->required();
  ev->add_option("--b", eval.b, "Second cloud set")->required();
  auto* k_opt = ev->add_option("--k", k, "Distances kept by tcd; required for tcd (2025 for 2048-vs-2025 clouds)");
  k_opt->default_str("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_sample(sample, out, err);
    if (sy->parsed()) return cmd_synth(synth, out);
    if (tr->parsed()) {
      if (seed_opt->count()) train_args.seed = seed_override;
      if (epochs_opt->count()) train_args.epochs = epochs_override;
      if (steps_opt->count()) train_args.max_steps = steps_override;
      return cmd_train(train_args, out, err);
    }
    if (en->parsed()) return cmd_encode(ckpt, clouds, out_path, out);
    if (de->parsed()) return cmd_decode(ckpt, embeddings, out_path, format, out);
    if (re->parsed()) return cmd_recon(ckpt, clouds, out_path, format, out);
    if (in->parsed()) return cmd_interp(ckpt, from, to, steps, out_path, out);
    if (co->parsed()) return cmd_complete(ckpt, clouds, out_path, seed, format, out);
    if (ev->parsed()) {
      if (k_opt->count()) eval.k = k;
      return cmd_eval(eval, out);
    }
  } catch (const Error& e) {
    err << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace treegcn
