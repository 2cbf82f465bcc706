#include "dsfcnn/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace dsf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(trim(item)));
    } catch (const std::exception&) {
      throw ConfigError("config: bad integer list for " + key);
    }
  }
  return out;
}

long parse_long(const std::string& v, const std::string& key) {
  try {
    return std::stol(trim(v));
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key);
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    return std::stod(trim(v));
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key);
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  const std::string t = trim(v);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("config: bad boolean for " + key);
}

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return fp.lexically_normal().string();
  return (base / fp).lexically_normal().string();
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  const std::filesystem::path base =
      std::filesystem::absolute(path).parent_path();

  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "model.n") cfg.group_n = static_cast<int>(parse_long(val, key));
    else if (key == "model.sigma") cfg.sigma = parse_double(val, key);
    else if (key == "model.spec7") cfg.spec7 = val;
    else if (key == "model.spec5") cfg.spec5 = val;
    else if (key == "model.head") cfg.head = val;
    else if (key == "model.num_classes") cfg.num_classes = static_cast<int>(parse_long(val, key));
    else if (key == "model.num_maps") cfg.num_maps = static_cast<int>(parse_long(val, key));
    else if (key == "model.stem_channels") cfg.stem_channels = static_cast<int>(parse_long(val, key));
    else if (key == "model.stem_hidden_channels") cfg.stem_hidden_channels = static_cast<int>(parse_long(val, key));
    else if (key == "model.stem_hidden_size") cfg.stem_hidden_size = static_cast<int>(parse_long(val, key));
    else if (key == "model.block_units") cfg.block_units = parse_int_list(val, key);
    else if (key == "model.block_channels") cfg.block_channels = parse_int_list(val, key);
    else if (key == "model.decoder_units") cfg.decoder_units = parse_int_list(val, key);
    else if (key == "model.decoder_channels") cfg.decoder_channels = parse_int_list(val, key);
    else if (key == "model.growth1") cfg.growth1 = static_cast<int>(parse_long(val, key));
    else if (key == "model.growth2") cfg.growth2 = static_cast<int>(parse_long(val, key));
    else if (key == "model.head_hidden") cfg.head_hidden = static_cast<int>(parse_long(val, key));
    else if (key == "model.width_mult") cfg.width_mult = parse_double(val, key);
    else if (key == "model.budget_target") cfg.budget_target = parse_long(val, key);
    else if (key == "train.epochs") cfg.epochs = static_cast<int>(parse_long(val, key));
    else if (key == "train.batch_size") cfg.batch_size = static_cast<int>(parse_long(val, key));
    else if (key == "train.lr") cfg.lr = parse_double(val, key);
    else if (key == "train.lr_decay_factor") cfg.lr_decay_factor = parse_double(val, key);
    else if (key == "train.lr_decay_at") cfg.lr_decay_at = parse_double(val, key);
    else if (key == "train.seed") cfg.seed = static_cast<std::uint64_t>(parse_long(val, key));
    else if (key == "data.train_images") cfg.train_images = resolve(base, val);
    else if (key == "data.train_labels") cfg.train_labels = resolve(base, val);
    else if (key == "data.test_images") cfg.test_images = resolve(base, val);
    else if (key == "data.test_labels") cfg.test_labels = resolve(base, val);
    else if (key == "data.train_count") cfg.train_count = parse_long(val, key);
    else if (key == "data.test_count") cfg.test_count = parse_long(val, key);
    else if (key == "data.rotate") cfg.rotate = parse_bool(val, key);
    else if (key == "data.rotate_seed_train") cfg.rotate_seed_train = static_cast<std::uint64_t>(parse_long(val, key));
    else if (key == "data.rotate_seed_test") cfg.rotate_seed_test = static_cast<std::uint64_t>(parse_long(val, key));
    else if (key == "data.pad_to") cfg.pad_to = static_cast<int>(parse_long(val, key));
    else if (key == "data.downscale") cfg.downscale = static_cast<int>(parse_long(val, key));
    else if (key == "output.dir") cfg.out_dir = resolve(base, val);
    else if (key == "output.metrics") cfg.metrics = resolve(base, val);
    else if (key == "output.checkpoint_dir") cfg.checkpoint_dir = resolve(base, val);
    else if (key == "output.stable_timing") cfg.stable_timing = parse_bool(val, key);
    else throw ConfigError("config: unknown key '" + key + "' (line " +
                           std::to_string(lineno) + ")");
  }

  if (cfg.head != "classifier" && cfg.head != "segmenter")
    throw ConfigError("config: model.head must be classifier or segmenter");
  if (cfg.batch_size < 1) throw ConfigError("config: train.batch_size >= 1");
  if (cfg.epochs < 0) throw ConfigError("config: train.epochs >= 0");
  return cfg;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig mc = ModelConfig::classifier_default(group_n);
  mc.sigma = sigma;
  mc.spec7 = FrequencySpec::parse(spec7);
  mc.spec5 = FrequencySpec::parse(spec5);
  mc.head = head == "segmenter" ? HeadKind::Segmenter : HeadKind::Classifier;
  mc.num_classes = num_classes;
  mc.num_maps = num_maps;
  mc.stem_channels = stem_channels;
  mc.stem_hidden_channels = stem_hidden_channels;
  mc.stem_hidden_size = stem_hidden_size;
  mc.block_units = block_units;
  mc.block_channels = block_channels;
  mc.decoder_units = decoder_units;
  mc.decoder_channels = decoder_channels;
  mc.growth1 = growth1;
  mc.growth2 = growth2;
  mc.head_hidden = head_hidden;
  mc.width_mult = width_mult;
  if (budget_target > 0) mc.budget_target = budget_target;
  return mc;
}

}  // namespace dsf
