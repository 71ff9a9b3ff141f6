#include "bgg/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bgg/errors.hpp"

namespace bgg {
namespace {

using json = nlohmann::ordered_json;

void model_to(json& j, const GeneratorConfig& m, const TrainOptions& t) {
  j["height"] = m.height;
  j["width"] = m.width;
  j["blocks"] = m.blocks;
  j["channels"] = m.channels;
  j["nodes"] = m.nodes;
  j["node_channels"] = m.node_channels;
  j["variant"] = std::string(variant_name(m.variant));
  j["ia_kernel"] = m.ia_kernel;
  j["part_kernel"] = m.part_kernel;
  j["share_parts"] = m.share_parts;
  j["use_norm"] = m.use_norm;
  j["disc_channels"] = m.disc_channels;
  j["disc_layers"] = m.disc_layers;
  j["lambda_gan"] = t.weights.gan;
  j["lambda_l1"] = t.weights.l1;
  j["lambda_per"] = t.weights.per;
  j["lr"] = t.adam.lr;
  j["beta1"] = t.adam.beta1;
  j["beta2"] = t.adam.beta2;
  j["adam_eps"] = t.adam.eps;
  j["batch_size"] = t.batch_size;
}

const std::set<std::string> kModelKeys{
    "height", "width", "blocks", "channels", "nodes", "node_channels", "variant", "ia_kernel",
    "part_kernel", "share_parts", "use_norm", "disc_channels", "disc_layers", "lambda_gan",
    "lambda_l1", "lambda_per", "lr", "beta1", "beta2", "adam_eps", "batch_size"};
const std::set<std::string> kRunKeys{"dataset", "out_dir", "steps", "seed", "checkpoint_every",
                                     "sample_every", "eval_every", "perceptual_weights"};

template <class T>
void read(const json& j, const char* key, T& into) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void model_from(const json& j, GeneratorConfig& m, TrainOptions& t) {
  read(j, "height", m.height);
  read(j, "width", m.width);
  read(j, "blocks", m.blocks);
  read(j, "channels", m.channels);
  read(j, "nodes", m.nodes);
  read(j, "node_channels", m.node_channels);
  if (j.contains("variant")) {
    std::string name;
    read(j, "variant", name);
    const auto v = parse_variant(name);
    if (!v) throw ConfigError("unknown variant '" + name + "'");
    m.variant = *v;
  }
  read(j, "ia_kernel", m.ia_kernel);
  read(j, "part_kernel", m.part_kernel);
  read(j, "share_parts", m.share_parts);
  read(j, "use_norm", m.use_norm);
  read(j, "disc_channels", m.disc_channels);
  read(j, "disc_layers", m.disc_layers);
  read(j, "lambda_gan", t.weights.gan);
  read(j, "lambda_l1", t.weights.l1);
  read(j, "lambda_per", t.weights.per);
  read(j, "lr", t.adam.lr);
  read(j, "beta1", t.adam.beta1);
  read(j, "beta2", t.adam.beta2);
  read(j, "adam_eps", t.adam.eps);
  read(j, "batch_size", t.batch_size);
}

json parse_object(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  return j;
}

void range(bool ok, const char* what) {
  if (!ok) throw ConfigError(std::string("config: ") + what);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  range(train.weights.gan >= 0 && train.weights.l1 >= 0 && train.weights.per >= 0,
        "loss weights must be non-negative");
  range(train.adam.lr > 0 && train.adam.lr < 1, "lr must be in (0, 1)");
  range(train.adam.beta1 >= 0 && train.adam.beta1 < 1, "beta1 must be in [0, 1)");
  range(train.adam.beta2 >= 0 && train.adam.beta2 < 1, "beta2 must be in [0, 1)");
  range(train.adam.eps > 0, "adam_eps must be positive");
  range(train.batch_size >= 1 && train.batch_size <= 1024, "batch_size must be in [1, 1024]");
  range(steps >= 1, "steps must be at least 1");
}

RunConfig parse_run_config(std::string_view text) {
  const json j = parse_object(text);
  for (const auto& [key, value] : j.items()) {
    if (!kModelKeys.count(key) && !kRunKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  RunConfig c;
  read(j, "dataset", c.dataset);
  read(j, "out_dir", c.out_dir);
  read(j, "steps", c.steps);
  read(j, "seed", c.seed);
  read(j, "checkpoint_every", c.checkpoint_every);
  read(j, "sample_every", c.sample_every);
  read(j, "eval_every", c.eval_every);
  read(j, "perceptual_weights", c.perceptual_weights);
  model_from(j, c.model, c.train);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["dataset"] = c.dataset;
  j["out_dir"] = c.out_dir;
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["sample_every"] = c.sample_every;
  j["eval_every"] = c.eval_every;
  j["perceptual_weights"] = c.perceptual_weights;
  model_to(j, c.model, c.train);
  return j.dump(2) + "\n";
}

std::string model_config_to_json(const GeneratorConfig& model, const TrainOptions& train) {
  json j;
  model_to(j, model, train);
  return j.dump();
}

void model_config_from_json(std::string_view text, GeneratorConfig& model, TrainOptions& train) {
  const json j = parse_object(text);
  for (const auto& [key, value] : j.items()) {
    if (!kModelKeys.count(key)) throw ConfigError("checkpoint config: unknown key '" + key + "'");
  }
  model_from(j, model, train);
  model.validate();
}

}  // namespace bgg
