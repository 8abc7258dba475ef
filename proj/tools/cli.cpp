#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plr/config.hpp"
#include "plr/corruptor.hpp"
#include "plr/error.hpp"
#include "plr/experiments.hpp"
#include "plr/lesionbank.hpp"
#include "plr/manifest.hpp"
#include "plr/metrics.hpp"
#include "plr/nn/gradcheck.hpp"
#include "plr/nn/weights.hpp"
#include "plr/perlin.hpp"
#include "plr/rng.hpp"
#include "plr/similarity.hpp"
#include "plr/synth.hpp"
#include "plr/training.hpp"

namespace plr::cli {

namespace fs = std::filesystem;

namespace {

using Apply = std::function<void(CliConfig&)>;

// Flags that override config values. Each records whether it was given, so
// the merge can run after the config file has been read.
class Overrides {
 public:
  template <typename T, typename F>
  CLI::Option* add(CLI::App* app, const std::string& flags, const std::string& desc, const T& shown, F apply) {
    auto value = std::make_shared<T>(shown);
    CLI::Option* o = app->add_option(flags, *value, desc)->default_str(show(shown));
    pending_[app].push_back([o, value, apply](CliConfig& c) {
      if (o->count() > 0) apply(c, *value);
    });
    return o;
  }

  CLI::Option* add_bool(CLI::App* app, const std::string& name, const std::string& desc, bool shown,
                        std::function<void(CliConfig&, bool)> apply) {
    auto value = std::make_shared<bool>(shown);
    CLI::Option* o = app->add_flag("--" + name + ",!--no-" + name, *value, desc)
                         ->default_str(shown ? "true" : "false");
    pending_[app].push_back([o, value, apply](CliConfig& c) {
      if (o->count() > 0) apply(c, *value);
    });
    return o;
  }

  void apply(CLI::App* app, CliConfig& c) const {
    const auto it = pending_.find(app);
    if (it == pending_.end()) return;
    for (const auto& fn : it->second) fn(c);
  }

 private:
  template <typename T>
  static std::string show(const T& v) {
    std::ostringstream s;
    s << v;
    return s.str();
  }

  std::map<CLI::App*, std::vector<Apply>> pending_;
};

lesion::SizeRange parse_size_range(const std::string& text) {
  const auto colon = text.find(':');
  require(colon != std::string::npos, ErrorCode::kInvalidArgument, "--size expects min:max, got '" + text + "'");
  lesion::SizeRange r;
  try {
    r.min = std::stoi(text.substr(0, colon));
    r.max = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidArgument, "--size expects min:max, got '" + text + "'");
  }
  return r;
}

std::vector<fs::path> list_images(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".pgm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  require(!files.empty(), ErrorCode::kEmptyInput, "no .png or .pgm images in " + dir.string());
  return files;
}

std::vector<img::GrayImage> load_images(const std::vector<fs::path>& files) {
  std::vector<img::GrayImage> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(img::load_image(f));
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorCode::kIo, "cannot write " + path.string());
  f << text;
  require(f.good(), ErrorCode::kIo, "write failed: " + path.string());
}

void emit(std::ostream& out, const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    out << text << '\n';
  } else {
    write_text(out_path, text + "\n");
  }
}

fs::path repeat_path(const fs::path& base, int r, int repeats) {
  if (repeats == 1) return base;
  fs::path p = base;
  p.replace_filename(base.stem().string() + "_r" + std::to_string(r) + base.extension().string());
  return p;
}

std::string summary_json(const pipeline::TrainResult& r, const char* metric) {
  nlohmann::ordered_json j;
  j["best_epoch"] = r.best_epoch;
  j[metric] = r.best_metric;
  j["epochs_run"] = r.history.size();
  j["steps"] = r.steps;
  j["stop_epoch"] = r.stop_epoch ? nlohmann::ordered_json(*r.stop_epoch) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

pipeline::EpochCallback progress(std::ostream& err, bool verbose) {
  if (!verbose) return {};
  return [&err](const pipeline::EpochRecord& r) { err << pipeline::epoch_json(r) << '\n'; };
}

void add_model_flags(Overrides& ov, CLI::App* app, const CliConfig& d) {
  ov.add(app, "--levels", "U-Net levels", d.model.unet.levels, [](CliConfig& c, int v) { c.model.unet.levels = v; });
  ov.add(app, "--base-channels", "channels at the first level", d.model.unet.base_channels,
         [](CliConfig& c, int v) { c.model.unet.base_channels = v; });
  ov.add(app, "--convs-per-level", "conv+ReLU units per level", d.model.unet.convs_per_level,
         [](CliConfig& c, int v) { c.model.unet.convs_per_level = v; });
  ov.add(app, "--head-units", "classifier hidden units", d.model.head_units,
         [](CliConfig& c, int v) { c.model.head_units = v; });
  ov.add(app, "--input-size", "images are resized to this square size", d.model.input_size,
         [](CliConfig& c, int v) { c.model.input_size = v; });
}

using PhaseRef = pipeline::TrainConfig CliConfig::*;

void add_phase_flags(Overrides& ov, CLI::App* app, const CliConfig& d, PhaseRef phase) {
  const pipeline::TrainConfig& t = d.*phase;
  ov.add(app, "--batch-size", "mini-batch size", t.batch_size,
         [phase](CliConfig& c, int v) { (c.*phase).batch_size = v; });
  ov.add(app, "--lr", "initial learning rate", t.optimizer.lr,
         [phase](CliConfig& c, double v) { (c.*phase).optimizer.lr = v; });
  ov.add(app, "--optimizer", "sgd or adadelta", std::string(nn::to_string(t.optimizer.kind)),
         [phase](CliConfig& c, const std::string& v) { (c.*phase).optimizer.kind = nn::parse_optimizer(v); });
  ov.add(app, "--momentum", "SGD momentum", t.optimizer.momentum,
         [phase](CliConfig& c, double v) { (c.*phase).optimizer.momentum = v; });
  ov.add(app, "--epochs", "maximum epochs", t.epochs, [phase](CliConfig& c, int v) { (c.*phase).epochs = v; });
  ov.add(app, "--max-steps", "stop after this many optimizer steps (0: no cap)", t.max_steps,
         [phase](CliConfig& c, long v) { (c.*phase).max_steps = v; });
  ov.add(app, "--patience", "plateau epochs before the lr is reduced", t.scheduler.patience,
         [phase](CliConfig& c, int v) { (c.*phase).scheduler.patience = v; });
  ov.add(app, "--factor", "lr reduction factor", t.scheduler.factor,
         [phase](CliConfig& c, double v) { (c.*phase).scheduler.factor = v; });
  ov.add(app, "--min-lr", "lr floor", t.scheduler.min_lr,
         [phase](CliConfig& c, double v) { (c.*phase).scheduler.min_lr = v; });
  ov.add_bool(app, "augment", "random zoom/shear augmentation", t.augment,
              [phase](CliConfig& c, bool v) { (c.*phase).augment = v; });
}

void add_corrupt_flags(Overrides& ov, CLI::App* app, const CliConfig& d) {
  const auto& s = d.corruption;
  ov.add(app, "--strategy", "perlin, gaussian or shuffle", std::string(corrupt::to_string(s.strategy)),
         [](CliConfig& c, const std::string& v) { c.corruption.strategy = corrupt::parse_strategy(v); });
  ov.add(app, "--per-image", "pseudo lesions per image (P)", s.patches_per_image,
         [](CliConfig& c, int v) { c.corruption.patches_per_image = v; });
  ov.add(app, "--kernel-size", "Gaussian kernel size", s.kernel_size,
         [](CliConfig& c, int v) { c.corruption.kernel_size = v; });
  ov.add(app, "--sigma", "Gaussian sigma, or auto", std::string("auto"), [](CliConfig& c, const std::string& v) {
    if (v == "auto") {
      c.corruption.sigma.reset();
    } else {
      c.corruption.sigma = std::stod(v);
    }
  });
  ov.add(app, "--grid", "shuffle blocks per side", s.grid, [](CliConfig& c, int v) { c.corruption.grid = v; });
  ov.add(app, "--paste-mode", "replace or max", std::string(corrupt::to_string(s.paste_mode)),
         [](CliConfig& c, const std::string& v) { c.corruption.paste_mode = corrupt::parse_paste_mode(v); });
  ov.add(app, "--mask-threshold", "dark threshold for derived lung masks", static_cast<int>(s.mask_threshold),
         [](CliConfig& c, int v) {
           require(v >= 0 && v <= 255, ErrorCode::kInvalidArgument, "--mask-threshold must lie in [0, 255]");
           c.corruption.mask_threshold = static_cast<std::uint8_t>(v);
         });
}

struct Paths {
  std::string config;
  bool dump_config = false;
  bool verbose = false;

  std::string out;
  std::string out_dir;
  std::string noise_dir;
  std::string normals;
  std::string masks;
  std::string bank;
  std::string manifest;
  std::string val_manifest;
  std::string train;
  std::string val;
  std::string encoder;
  std::string log;
  std::vector<std::string> weights;
  std::string image;
  std::string layer;
  std::string set_a;
  std::string set_b;
  std::vector<std::string> ops;
  double tolerance = 0.0;
  std::vector<int> p_values;
  std::vector<std::size_t> m_values;
  int repeats = 1;
  int synth_normals = 64;
  int synth_size = 64;
  int synth_train = 200;
  int synth_val = 100;
};

int cmd_gen_noise(const CliConfig& c, const Paths& p, std::ostream& out) {
  fs::create_directories(p.out_dir);
  for (int k = 0; k < c.noise_count; ++k) {
    const auto im = perlin::render_noise_image(c.seed + static_cast<std::uint64_t>(k), c.noise_size, c.noise);
    char name[32];
    std::snprintf(name, sizeof(name), "noise_%04d.png", k);
    img::save_image(im, fs::path(p.out_dir) / name);
  }
  out << "wrote " << c.noise_count << " noise images to " << p.out_dir << '\n';
  return 0;
}

int cmd_build_bank(const CliConfig& c, const Paths& p, std::ostream& out) {
  const auto noise = load_images(list_images(p.noise_dir));
  const auto bank = lesion::build_bank(noise, c.bank_count, c.bank_threshold, c.bank_size, c.seed);
  lesion::save_bank(bank, p.out);
  out << "wrote " << bank.count() << " patches to " << p.out << '\n';
  return 0;
}

int cmd_corrupt(const CliConfig& c, const Paths& p, std::ostream& out) {
  corrupt::DatasetRequest req;
  req.normals = list_images(p.normals);
  if (!p.masks.empty() && p.masks != "auto") {
    for (const auto& n : req.normals) req.masks.push_back(fs::path(p.masks) / n.filename());
  }
  std::optional<lesion::PatchBank> bank;
  if (c.corruption.strategy == corrupt::Strategy::kPerlin) {
    require(!p.bank.empty(), ErrorCode::kInvalidArgument, "--bank is required for the perlin strategy");
    bank = lesion::load_bank(p.bank);
    req.bank = &*bank;
  }
  req.spec = c.corruption;
  req.count = c.corrupt_count;
  req.out_dir = p.out_dir;
  req.manifest_path = p.manifest;
  const auto manifest = corrupt::generate_dataset(req);
  out << "wrote " << manifest.entries.size() << " pseudo images and " << p.manifest << '\n';
  return 0;
}

int cmd_pretrain(const CliConfig& c, const Paths& p, std::ostream& out, std::ostream& err) {
  auto cfg = c.pretrain;
  cfg.log_path = p.log;
  const auto all = pipeline::load_restoration_set(corrupt::read_manifest(p.manifest), c.model.input_size);
  pipeline::RestorationSet train;
  pipeline::RestorationSet val;
  if (p.val_manifest.empty()) {
    std::tie(train, val) = pipeline::split_restoration(all, cfg.val_fraction, cfg.seed);
  } else {
    train = all;
    val = pipeline::load_restoration_set(corrupt::read_manifest(p.val_manifest), c.model.input_size);
  }
  const auto result = pipeline::pretrain(train, val, c.model, cfg, progress(err, p.verbose));
  nn::save_weights(result.best, p.out);
  out << summary_json(result, "best_val_mse") << '\n';
  return 0;
}

int cmd_finetune(const CliConfig& c, const Paths& p, std::ostream& out, std::ostream& err) {
  require(p.repeats >= 1, ErrorCode::kInvalidArgument, "--repeats must be >= 1");
  std::optional<pipeline::Weights> encoder;
  if (!p.encoder.empty()) encoder = nn::load_weights<float>(p.encoder);
  const auto train = pipeline::load_labeled_set(corrupt::read_manifest(p.train), c.model.input_size);
  const auto val = pipeline::load_labeled_set(corrupt::read_manifest(p.val), c.model.input_size);
  for (int r = 0; r < p.repeats; ++r) {
    auto cfg = c.finetune;
    cfg.seed = c.seed + static_cast<std::uint64_t>(r);
    if (!p.log.empty()) cfg.log_path = repeat_path(p.log, r, p.repeats);
    const auto result =
        pipeline::finetune(encoder ? &*encoder : nullptr, train, val, c.model, cfg, progress(err, p.verbose));
    const auto path = repeat_path(p.out, r, p.repeats);
    nn::save_weights(result.best, path);
    out << summary_json(result, "best_val_accuracy") << '\n';
  }
  return 0;
}

int cmd_evaluate(const CliConfig& c, const Paths& p, std::ostream& out) {
  const auto set = pipeline::load_labeled_set(corrupt::read_manifest(p.manifest), c.model.input_size);
  std::vector<pipeline::Metrics> runs;
  for (const auto& w : p.weights) {
    const auto weights = nn::load_weights<float>(w);
    require(weights.arch.kind == nn::ModelKind::kClassifier, ErrorCode::kFingerprintMismatch,
            w + " holds restoration weights; evaluate needs a fine-tuned classifier");
    runs.push_back(pipeline::evaluate(weights, set));
  }
  const std::string text =
      runs.size() == 1 ? pipeline::metrics_json(runs.front()) : pipeline::repeats_json(pipeline::summarize_repeats(runs));
  emit(out, p.out, text);
  return 0;
}

int cmd_similarity(const Paths& p, std::ostream& out) {
  const auto a = load_images(list_images(p.set_a));
  const auto b = load_images(list_images(p.set_b));
  const auto r = sim::set_similarity(std::span<const img::GrayImage>(a), std::span<const img::GrayImage>(b));
  nlohmann::ordered_json j;
  j["mean_cosine_distance"] = r.mean_cosine_distance;
  j["mean_js_divergence"] = r.mean_js_divergence;
  j["pair_count"] = r.pair_count;
  j["size_a"] = r.size_a;
  j["size_b"] = r.size_b;
  emit(out, p.out, j.dump(2));
  return 0;
}

int cmd_sweep(const CliConfig& c, const Paths& p, std::ostream& out) {
  pipeline::SweepInputs in;
  in.normals = load_images(list_images(p.normals));
  for (auto& n : in.normals) {
    if (n.width() != c.model.input_size || n.height() != c.model.input_size) {
      n = img::resize_bilinear(n, c.model.input_size, c.model.input_size);
    }
  }
  std::optional<lesion::PatchBank> bank;
  if (c.corruption.strategy == corrupt::Strategy::kPerlin) {
    require(!p.bank.empty(), ErrorCode::kInvalidArgument, "--bank is required for the perlin strategy");
    bank = lesion::load_bank(p.bank);
    in.bank = &*bank;
  }
  in.train = pipeline::load_labeled_set(corrupt::read_manifest(p.train), c.model.input_size);
  in.val = pipeline::load_labeled_set(corrupt::read_manifest(p.val), c.model.input_size);
  pipeline::SweepConfig cfg;
  cfg.patch_counts = p.p_values;
  cfg.image_counts = p.m_values;
  cfg.spec = c.corruption;
  cfg.model = c.model;
  cfg.pretrain = c.pretrain;
  cfg.finetune = c.finetune;
  const auto cells = pipeline::sweep(in, cfg);
  emit(out, p.out, pipeline::sweep_json(cells));
  return 0;
}

int cmd_gradcheck(const CliConfig& c, const Paths& p, std::ostream& out) {
  const auto ops = p.ops.empty() ? nn::gradcheck_ops() : p.ops;
  bool all = true;
  for (const auto& op : ops) {
    const double tol = p.tolerance > 0.0 ? p.tolerance : nn::default_tolerance(op);
    const auto r = nn::grad_check(op, c.gradcheck_trials, tol, c.seed);
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s trials=%-3d checked=%-5zu max_rel_err=%.3e tol=%.0e %s\n",
                  r.op.c_str(), r.trials, r.checked, r.max_rel_error, r.tolerance, r.passed ? "PASS" : "FAIL");
    out << line;
    all = all && r.passed;
  }
  return all ? 0 : 2;
}

int cmd_viz(const CliConfig& c, const Paths& p, std::ostream& out) {
  const auto weights = nn::load_weights<float>(p.weights.front());
  auto image = img::load_image(p.image);
  if (image.width() != c.model.input_size || image.height() != c.model.input_size) {
    image = img::resize_bilinear(image, c.model.input_size, c.model.input_size);
  }
  const auto grid = pipeline::export_activations(weights, image, p.layer);
  img::save_image(grid, p.out);
  out << "wrote " << grid.width() << "x" << grid.height() << " activation grid to " << p.out << '\n';
  return 0;
}

// Phantom scans for trying the pipeline without clinical data.
int cmd_synth(const CliConfig& c, const Paths& p, std::ostream& out) {
  const fs::path root = p.out_dir;
  const fs::path normals = root / "normals";
  const fs::path images = root / "classify";
  fs::create_directories(normals);
  fs::create_directories(images);
  char name[48];
  for (int i = 0; i < p.synth_normals; ++i) {
    std::snprintf(name, sizeof(name), "normal_%03d.png", i);
    img::save_image(synth::normal_scan(p.synth_size, mix_seed(c.seed, static_cast<std::uint64_t>(i))), normals / name);
  }
  auto write_split = [&](const char* split, int count, std::uint64_t stream) {
    const auto set = synth::bright_square_set(count, p.synth_size, mix_seed(c.seed, stream));
    corrupt::DatasetManifest m;
    for (int i = 0; i < count; ++i) {
      std::snprintf(name, sizeof(name), "%s_%04d.png", split, i);
      img::save_image(set.images[static_cast<std::size_t>(i)], images / name);
      m.entries.push_back({images / name, std::nullopt, set.labels[static_cast<std::size_t>(i)]});
    }
    m.split = std::string_view(split) == "train" ? corrupt::Split::kTrain : corrupt::Split::kVal;
    corrupt::write_manifest(m, root / (std::string(split) + ".jsonl"));
  };
  write_split("train", p.synth_train, 1000);
  write_split("val", p.synth_val, 2000);
  out << "wrote " << p.synth_normals << " normals, " << p.synth_train << " train and " << p.synth_val
      << " val images under " << root.string() << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const CliConfig d = default_config();
  CLI::App app{"Pseudo-lesion restoration pretraining pipeline", "plr"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides ov;
  Paths p;

  app.add_option("--config", p.config, "INI config file (flags override it)")->check(CLI::ExistingFile);
  app.add_flag("--dump-config", p.dump_config, "print the effective configuration as JSON and exit");
  app.add_flag("-v,--verbose", p.verbose, "per-epoch progress on stderr");
  ov.add(&app, "--seed", "global seed (PLR_SEED is used when neither this nor the config sets one)", d.seed,
         [](CliConfig& c, std::uint64_t v) { c.seed = v; });

  auto* gen = app.add_subcommand("gen-noise", "render Perlin noise images");
  gen->add_option("--out", p.out_dir, "output directory")->required();
  ov.add(gen, "--count", "number of images", d.noise_count, [](CliConfig& c, int v) { c.noise_count = v; });
  ov.add(gen, "--size", "image side in pixels", d.noise_size, [](CliConfig& c, int v) { c.noise_size = v; });
  ov.add(gen, "--octaves", "octave count", d.noise.octaves, [](CliConfig& c, int v) { c.noise.octaves = v; });
  ov.add(gen, "--base-freq", "cycles per pixel of the first octave", d.noise.base_frequency,
         [](CliConfig& c, double v) { c.noise.base_frequency = v; });
  ov.add(gen, "--persistence", "amplitude ratio between octaves", d.noise.persistence,
         [](CliConfig& c, double v) { c.noise.persistence = v; });
  ov.add(gen, "--lacunarity", "frequency ratio between octaves", d.noise.lacunarity,
         [](CliConfig& c, double v) { c.noise.lacunarity = v; });

  auto* bank = app.add_subcommand("build-bank", "cut bright patches from noise images into a bank");
  bank->add_option("--noise-dir", p.noise_dir, "directory of noise images")->required();
  bank->add_option("--out", p.out, "bank file")->required();
  ov.add(bank, "--count", "patches to collect", d.bank_count, [](CliConfig& c, std::size_t v) { c.bank_count = v; });
  ov.add(bank, "--min-mean", "patch mean intensity must exceed this", d.bank_threshold,
         [](CliConfig& c, double v) { c.bank_threshold = v; });
  ov.add(bank, "--size", "patch side range min:max",
         std::to_string(d.bank_size.min) + ":" + std::to_string(d.bank_size.max),
         [](CliConfig& c, const std::string& v) { c.bank_size = parse_size_range(v); });

  auto* corr = app.add_subcommand("corrupt", "generate pseudo-lesion images and a restoration manifest");
  corr->add_option("--images", p.normals, "directory of normal images")->required();
  corr->add_option("--masks", p.masks, "directory of lung masks named like the images, or auto")->default_str("auto");
  corr->add_option("--bank", p.bank, "patch bank (perlin strategy)");
  corr->add_option("--out", p.out_dir, "directory for pseudo images")->required();
  corr->add_option("--manifest", p.manifest, "manifest to write")->required();
  ov.add(corr, "--count", "pseudo images to generate (M)", d.corrupt_count,
         [](CliConfig& c, std::size_t v) { c.corrupt_count = v; });
  add_corrupt_flags(ov, corr, d);

  auto* pre = app.add_subcommand("pretrain", "train the restoration U-Net");
  pre->add_option("--manifest", p.manifest, "restoration manifest")->required();
  pre->add_option("--val-manifest", p.val_manifest, "validation manifest (default: hold out --val-fraction)");
  pre->add_option("--out", p.out, "best weights")->required();
  pre->add_option("--log", p.log, "per-epoch JSON Lines log");
  ov.add(pre, "--val-fraction", "share held out for validation", d.pretrain.val_fraction,
         [](CliConfig& c, double v) { c.pretrain.val_fraction = v; });
  add_phase_flags(ov, pre, d, &CliConfig::pretrain);
  add_model_flags(ov, pre, d);

  auto* fine = app.add_subcommand("finetune", "train the classifier, optionally from a pretrained encoder");
  fine->add_option("--train", p.train, "training manifest (labels)")->required();
  fine->add_option("--val", p.val, "validation manifest (labels)")->required();
  fine->add_option("--encoder", p.encoder, "pretrained weights to take the encoder from");
  fine->add_option("--out", p.out, "best weights (suffixed _r<k> with --repeats)")->required();
  fine->add_option("--log", p.log, "per-epoch JSON Lines log");
  fine->add_option("--repeats", p.repeats, "independent runs with seeds seed, seed+1, ...")->default_str("1");
  ov.add(fine, "--label-fraction", "share of training labels used", d.finetune.label_fraction,
         [](CliConfig& c, double v) { c.finetune.label_fraction = v; });
  ov.add(fine, "--stop-at", "stop once validation accuracy reaches this (none: off)", std::string("none"),
         [](CliConfig& c, const std::string& v) {
           if (v == "none") {
             c.finetune.stop_at.reset();
           } else {
             c.finetune.stop_at = std::stod(v);
           }
         });
  add_phase_flags(ov, fine, d, &CliConfig::finetune);
  add_model_flags(ov, fine, d);

  auto* eval = app.add_subcommand("evaluate", "metrics of classifier weights on a labeled manifest");
  eval->add_option("--weights", p.weights, "classifier weights; several give highest/average")->required();
  eval->add_option("--manifest", p.manifest, "labeled manifest")->required();
  eval->add_option("--out", p.out, "metrics JSON (default: stdout)");
  ov.add(eval, "--input-size", "images are resized to this square size", d.model.input_size,
         [](CliConfig& c, int v) { c.model.input_size = v; });

  auto* simc = app.add_subcommand("similarity", "cosine distance and JS divergence between two image sets");
  simc->add_option("--set-a", p.set_a, "first image directory")->required();
  simc->add_option("--set-b", p.set_b, "second image directory")->required();
  simc->add_option("--out", p.out, "report JSON (default: stdout)");

  auto* sw = app.add_subcommand("sweep", "corrupt, pretrain, fine-tune and evaluate over a P x M grid");
  sw->add_option("--normals", p.normals, "directory of normal images")->required();
  sw->add_option("--bank", p.bank, "patch bank (perlin strategy)");
  sw->add_option("--train", p.train, "fine-tuning manifest")->required();
  sw->add_option("--val", p.val, "validation manifest")->required();
  sw->add_option("--p", p.p_values, "patches per image values")->required()->delimiter(',');
  sw->add_option("--m", p.m_values, "pseudo image counts")->required()->delimiter(',');
  sw->add_option("--out", p.out, "report JSON (default: stdout)");
  add_corrupt_flags(ov, sw, d);
  add_model_flags(ov, sw, d);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
  gc->add_option("--op", p.ops, "ops to check (default: all)");
  gc->add_option("--tol", p.tolerance, "tolerance (default: 1e-4 per op, 1e-3 end-to-end)");
  ov.add(gc, "--trials", "random trials per op", d.gradcheck_trials, [](CliConfig& c, int v) { c.gradcheck_trials = v; });

  auto* viz = app.add_subcommand("viz-activations", "tile one conv layer's feature maps into an image");
  viz->add_option("--weights", p.weights, "weights file")->required()->expected(1);
  viz->add_option("--image", p.image, "input image")->required();
  viz->add_option("--layer", p.layer, "layer name, e.g. conv_8")->required();
  viz->add_option("--out", p.out, "output image")->required();
  ov.add(viz, "--input-size", "images are resized to this square size", d.model.input_size,
         [](CliConfig& c, int v) { c.model.input_size = v; });

  auto* syn = app.add_subcommand("synth-data", "write phantom scans and a bright-square classification set");
  syn->add_option("--out-dir", p.out_dir, "output directory")->required();
  syn->add_option("--normals", p.synth_normals, "normal scans")->default_str("64");
  syn->add_option("--size", p.synth_size, "image side")->default_str("64");
  syn->add_option("--train", p.synth_train, "training images (half with a bright square)")->default_str("200");
  syn->add_option("--val", p.synth_val, "validation images")->default_str("100");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);  // --help
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  // Config problems (bad INI, bad PLR_SEED, out-of-range values) are usage errors.
  CLI::App* sub = app.get_subcommands().front();
  CliConfig cfg = d;
  try {
    apply_env(cfg);
    if (!p.config.empty()) apply_ini(cfg, p.config);
    ov.apply(&app, cfg);
    ov.apply(sub, cfg);
    cfg.propagate_seed();
    cfg.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  if (p.dump_config) {
    out << config_json(cfg);
    return 0;
  }

  try {
    const std::string name = sub->get_name();
    if (name == "gen-noise") return cmd_gen_noise(cfg, p, out);
    if (name == "build-bank") return cmd_build_bank(cfg, p, out);
    if (name == "corrupt") return cmd_corrupt(cfg, p, out);
    if (name == "pretrain") return cmd_pretrain(cfg, p, out, err);
    if (name == "finetune") return cmd_finetune(cfg, p, out, err);
    if (name == "evaluate") return cmd_evaluate(cfg, p, out);
    if (name == "similarity") return cmd_similarity(p, out);
    if (name == "sweep") return cmd_sweep(cfg, p, out);
    if (name == "gradcheck") return cmd_gradcheck(cfg, p, out);
    if (name == "viz-activations") return cmd_viz(cfg, p, out);
    if (name == "synth-data") return cmd_synth(cfg, p, out);
    err << "error: unhandled subcommand " << name << '\n';
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace plr::cli
