#include "plr/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "json_io.hpp"
#include "plr/error.hpp"

namespace plr {

namespace {

using Setter = std::function<void(const std::string&)>;
using Section = std::map<std::string, Setter>;

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  require(ec == std::errc{} && ptr == end, ErrorCode::kInvalidArgument,
          "config key '" + key + "': cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  fail(ErrorCode::kInvalidArgument, "config key '" + key + "': expected a boolean, got '" + text + "'");
}

template <typename T>
Setter num(T& field, const std::string& key) {
  return [&field, key](const std::string& v) { field = parse_number<T>(v, key); };
}

Setter flag(bool& field, const std::string& key) {
  return [&field, key](const std::string& v) { field = parse_bool(v, key); };
}

void add_phase(std::map<std::string, Section>& s, const std::string& name, pipeline::TrainConfig& t) {
  auto& sec = s[name];
  sec["batch_size"] = num(t.batch_size, name + ".batch_size");
  sec["lr"] = num(t.optimizer.lr, name + ".lr");
  sec["optimizer"] = [&t](const std::string& v) { t.optimizer.kind = nn::parse_optimizer(v); };
  sec["epochs"] = num(t.epochs, name + ".epochs");
  sec["max_steps"] = num(t.max_steps, name + ".max_steps");
  sec["augment"] = flag(t.augment, name + ".augment");
}

std::map<std::string, Section> sections(CliConfig& c) {
  std::map<std::string, Section> s;
  s["train"]["seed"] = num(c.seed, "train.seed");

  s["noise"]["size"] = num(c.noise_size, "noise.size");
  s["noise"]["count"] = num(c.noise_count, "noise.count");
  s["noise"]["octaves"] = num(c.noise.octaves, "noise.octaves");
  s["noise"]["base_frequency"] = num(c.noise.base_frequency, "noise.base_frequency");
  s["noise"]["persistence"] = num(c.noise.persistence, "noise.persistence");
  s["noise"]["lacunarity"] = num(c.noise.lacunarity, "noise.lacunarity");

  s["bank"]["count"] = num(c.bank_count, "bank.count");
  s["bank"]["threshold"] = num(c.bank_threshold, "bank.threshold");
  s["bank"]["min_size"] = num(c.bank_size.min, "bank.min_size");
  s["bank"]["max_size"] = num(c.bank_size.max, "bank.max_size");

  auto& cs = c.corruption;
  s["corrupt"]["strategy"] = [&cs](const std::string& v) { cs.strategy = corrupt::parse_strategy(v); };
  s["corrupt"]["patches"] = num(cs.patches_per_image, "corrupt.patches");
  s["corrupt"]["count"] = num(c.corrupt_count, "corrupt.count");
  s["corrupt"]["kernel_size"] = num(cs.kernel_size, "corrupt.kernel_size");
  s["corrupt"]["sigma"] = [&cs](const std::string& v) {
    if (v == "auto") {
      cs.sigma.reset();
    } else {
      cs.sigma = parse_number<double>(v, "corrupt.sigma");
    }
  };
  s["corrupt"]["grid"] = num(cs.grid, "corrupt.grid");
  s["corrupt"]["paste_mode"] = [&cs](const std::string& v) { cs.paste_mode = corrupt::parse_paste_mode(v); };
  s["corrupt"]["mask_threshold"] = num(cs.mask_threshold, "corrupt.mask_threshold");

  auto& m = c.model;
  s["model"]["levels"] = num(m.unet.levels, "model.levels");
  s["model"]["base_channels"] = num(m.unet.base_channels, "model.base_channels");
  s["model"]["convs_per_level"] = num(m.unet.convs_per_level, "model.convs_per_level");
  s["model"]["kernel"] = num(m.unet.kernel, "model.kernel");
  s["model"]["head_units"] = num(m.head_units, "model.head_units");
  s["model"]["input_size"] = num(m.input_size, "model.input_size");

  for (auto* t : {&c.pretrain, &c.finetune}) {
    auto& o = t->optimizer;
    auto& sc = t->scheduler;
    auto chain = [](Setter& slot, Setter next) {
      Setter prev = slot;
      slot = [prev, next](const std::string& v) {
        if (prev) prev(v);
        next(v);
      };
    };
    chain(s["optimizer"]["momentum"], num(o.momentum, "optimizer.momentum"));
    chain(s["optimizer"]["rho"], num(o.rho, "optimizer.rho"));
    chain(s["optimizer"]["eps"], num(o.eps, "optimizer.eps"));
    chain(s["scheduler"]["patience"], num(sc.patience, "scheduler.patience"));
    chain(s["scheduler"]["factor"], num(sc.factor, "scheduler.factor"));
    chain(s["scheduler"]["min_lr"], num(sc.min_lr, "scheduler.min_lr"));
  }

  add_phase(s, "pretrain", c.pretrain);
  s["pretrain"]["val_fraction"] = num(c.pretrain.val_fraction, "pretrain.val_fraction");
  add_phase(s, "finetune", c.finetune);
  s["finetune"]["label_fraction"] = num(c.finetune.label_fraction, "finetune.label_fraction");
  auto& ft = c.finetune;
  s["finetune"]["stop_at"] = [&ft](const std::string& v) {
    if (v == "none") {
      ft.stop_at.reset();
    } else {
      ft.stop_at = parse_number<double>(v, "finetune.stop_at");
    }
  };

  s["gradcheck"]["trials"] = num(c.gradcheck_trials, "gradcheck.trials");
  return s;
}

nlohmann::ordered_json phase_json(const pipeline::TrainConfig& t) {
  nlohmann::ordered_json j;
  j["batch_size"] = t.batch_size;
  j["optimizer"] = nn::to_string(t.optimizer.kind);
  j["lr"] = t.optimizer.lr;
  j["momentum"] = t.optimizer.momentum;
  j["rho"] = t.optimizer.rho;
  j["eps"] = t.optimizer.eps;
  j["epochs"] = t.epochs;
  j["scheduler"] = {{"monitor", t.scheduler.mode == nn::MetricMode::kMin ? "val_mse (min)" : "val_accuracy (max)"},
                    {"patience", t.scheduler.patience},
                    {"factor", t.scheduler.factor},
                    {"min_lr", t.scheduler.min_lr}};
  j["augment"] = t.augment;
  if (t.phase == pipeline::Phase::kPretrain) {
    j["val_fraction"] = t.val_fraction;
  } else {
    j["label_fraction"] = t.label_fraction;
    j["stop_at"] = t.stop_at ? nlohmann::ordered_json(*t.stop_at) : nlohmann::ordered_json(nullptr);
  }
  j["max_steps"] = t.max_steps;
  j["seed"] = t.seed;
  return j;
}

}  // namespace

void CliConfig::propagate_seed() {
  corruption.seed = seed;
  pretrain.seed = seed;
  finetune.seed = seed;
}

void CliConfig::validate() const {
  noise.validate();
  require(noise_size >= 1, ErrorCode::kInvalidArgument, "noise.size must be >= 1");
  require(noise_count >= 1, ErrorCode::kInvalidArgument, "noise.count must be >= 1");
  require(bank_count >= 1, ErrorCode::kInvalidArgument, "bank.count must be >= 1");
  require(bank_size.min >= 1 && bank_size.min <= bank_size.max, ErrorCode::kInvalidArgument,
          "bank size range must satisfy 1 <= min_size <= max_size");
  require(bank_size.max <= noise_size, ErrorCode::kInvalidArgument, "bank.max_size exceeds noise.size");
  corruption.validate();
  model.validate();
  pretrain.validate();
  finetune.validate();
  require(gradcheck_trials >= 1, ErrorCode::kInvalidArgument, "gradcheck.trials must be >= 1");
}

CliConfig default_config() {
  CliConfig c;
  c.propagate_seed();
  return c;
}

void apply_env(CliConfig& config) {
  const char* env = std::getenv("PLR_SEED");
  if (env == nullptr || *env == '\0') return;
  config.seed = parse_number<std::uint64_t>(env, "PLR_SEED");
  config.propagate_seed();
}

void apply_ini_text(CliConfig& config, const std::string& text, const std::string& name) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::kInvalidArgument, name + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  auto table = sections(config);
  for (const auto& [section, body] : tree) {
    require(!(body.empty() && !body.data().empty()), ErrorCode::kInvalidArgument,
            name + ": key '" + section + "' outside of a section");
    const auto sec = table.find(section);
    require(sec != table.end(), ErrorCode::kInvalidArgument, name + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const auto setter = sec->second.find(key);
      require(setter != sec->second.end(), ErrorCode::kInvalidArgument,
              name + ": unknown key '" + key + "' in [" + section + "]");
      setter->second(value.data());
    }
  }
  config.propagate_seed();
}

void apply_ini(CliConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kIo, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  apply_ini_text(config, buf.str(), path.string());
}

std::string config_json(const CliConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["noise"] = {{"size", c.noise_size},
                {"count", c.noise_count},
                {"octaves", c.noise.octaves},
                {"base_frequency", c.noise.base_frequency},
                {"persistence", c.noise.persistence},
                {"lacunarity", c.noise.lacunarity}};
  j["bank"] = {{"count", c.bank_count},
               {"threshold", c.bank_threshold},
               {"min_size", c.bank_size.min},
               {"max_size", c.bank_size.max}};
  auto corr = detail::to_json(c.corruption);
  corr["count"] = c.corrupt_count;
  j["corrupt"] = corr;
  j["model"] = {{"levels", c.model.unet.levels},
                {"base_channels", c.model.unet.base_channels},
                {"convs_per_level", c.model.unet.convs_per_level},
                {"kernel", c.model.unet.kernel},
                {"head_units", c.model.head_units},
                {"input_size", c.model.input_size}};
  j["pretrain"] = phase_json(c.pretrain);
  j["finetune"] = phase_json(c.finetune);
  j["gradcheck"] = {{"trials", c.gradcheck_trials}};
  return j.dump(2) + "\n";
}

}  // namespace plr
