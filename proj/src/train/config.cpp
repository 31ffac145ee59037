#include "tvr/train/config.hpp"

#include <fstream>
#include <set>

#include "tvr/core/error.hpp"
#include "tvr/core/params.hpp"

namespace tvr {

namespace {

template <class Enum, std::size_t N>
Enum parse_enum(const std::string& s, const std::pair<const char*, Enum> (&table)[N], const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  throw InvalidArgument(std::string("unknown ") + what + " '" + s + "'");
}

template <class Enum, std::size_t N>
std::string enum_name(Enum e, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, value] : table)
    if (e == value) return name;
  return "?";
}

constexpr std::pair<const char*, LossKind> kLossNames[] = {{"ce", LossKind::CrossEntropy},
                                                           {"sigmoid", LossKind::Sigmoid}};
constexpr std::pair<const char*, EnergyKind> kEnergyNames[] = {
    {"cossim", EnergyKind::CosSim}, {"bilinear", EnergyKind::Bilinear}, {"mlp", EnergyKind::Mlp}};
constexpr std::pair<const char*, Pooling> kPoolingNames[] = {
    {"avg", Pooling::Avg}, {"max", Pooling::Max}, {"min", Pooling::Min}, {"global", Pooling::Global}};
constexpr std::pair<const char*, GraphKind> kGraphNames[] = {{"rgat", GraphKind::Relational},
                                                             {"gat", GraphKind::FullyConnected}};
constexpr std::pair<const char*, FusionKind> kFusionNames[] = {{"xattn", FusionKind::CrossAttention},
                                                               {"mean", FusionKind::Mean}};

void check_keys(const nlohmann::json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InvalidArgument(std::string("config section '") + section + "' must be an object");
  std::set<std::string> names(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (names.count(it.key()) == 0)
      throw InvalidArgument(std::string("unknown config key '") + section + "." + it.key() + "'");
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("config key '") + key + "' has the wrong type");
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw InvalidArgument(message);
}

}  // namespace

std::string to_string(LossKind k) { return enum_name(k, kLossNames); }
std::string to_string(EnergyKind k) { return enum_name(k, kEnergyNames); }
std::string to_string(Pooling p) { return enum_name(p, kPoolingNames); }
std::string to_string(GraphKind g) { return enum_name(g, kGraphNames); }
std::string to_string(FusionKind f) { return enum_name(f, kFusionNames); }

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["data"] = {{"train", c.data.train}, {"val", c.data.val}, {"test", c.data.test}};
  j["model"] = {{"dim", c.dim},
                {"frames", c.frames},
                {"adapters", c.adapters},
                {"radius_init_std", c.radius_init_std}};
  j["fusion"] = {{"kind", to_string(c.fusion.kind)}, {"proj_dim", c.fusion.proj_dim}, {"dropout", c.fusion.dropout}};
  j["frl"] = {{"enabled", c.frl.enabled},
              {"graph", to_string(c.frl.graph)},
              {"drop_f2f", c.frl.drop_f2f},
              {"heads", c.frl.heads},
              {"layers", c.frl.layers},
              {"num_candidates", c.frl.num_candidates},
              {"dropout", c.frl.dropout}};
  j["eam"] = {{"enabled", c.eam.enabled},
              {"energy", to_string(c.eam.energy)},
              {"pooling", to_string(c.eam.pooling)},
              {"hidden", c.eam.hidden},
              {"k", c.eam.steps},
              {"eta", c.eam.step_size},
              {"sigma2", c.eam.noise_var},
              {"buffer_capacity", c.eam.buffer_capacity},
              {"reuse_prob", c.eam.reuse_prob},
              {"reg", c.eam.reg}};
  j["loss"] = {{"kind", to_string(c.loss)}, {"lambda_sup", c.lambda_sup}, {"lambda_eam", c.lambda_eam}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"max_steps", c.train.max_steps},
                {"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"warmup", c.train.warmup},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"eps", c.train.eps},
                {"eval_every", c.train.eval_every},
                {"seed", c.seed}};
  j["eval"] = {{"sample_seed", c.eval_seed}};
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  check_keys(j, "root", {"data", "model", "fusion", "frl", "eam", "loss", "train", "eval"});
  RunConfig c;
  if (j.contains("data")) {
    const auto& s = j["data"];
    check_keys(s, "data", {"train", "val", "test"});
    read(s, "train", c.data.train);
    read(s, "val", c.data.val);
    read(s, "test", c.data.test);
  }
  if (j.contains("model")) {
    const auto& s = j["model"];
    check_keys(s, "model", {"dim", "frames", "adapters", "radius_init_std"});
    read(s, "dim", c.dim);
    read(s, "frames", c.frames);
    read(s, "adapters", c.adapters);
    read(s, "radius_init_std", c.radius_init_std);
  }
  if (j.contains("fusion")) {
    const auto& s = j["fusion"];
    check_keys(s, "fusion", {"kind", "proj_dim", "dropout"});
    std::string kind = to_string(c.fusion.kind);
    read(s, "kind", kind);
    c.fusion.kind = parse_enum(kind, kFusionNames, "fusion kind");
    read(s, "proj_dim", c.fusion.proj_dim);
    read(s, "dropout", c.fusion.dropout);
  }
  if (j.contains("frl")) {
    const auto& s = j["frl"];
    check_keys(s, "frl", {"enabled", "graph", "drop_f2f", "heads", "layers", "num_candidates", "dropout"});
    read(s, "enabled", c.frl.enabled);
    std::string graph = to_string(c.frl.graph);
    read(s, "graph", graph);
    c.frl.graph = parse_enum(graph, kGraphNames, "graph kind");
    read(s, "drop_f2f", c.frl.drop_f2f);
    read(s, "heads", c.frl.heads);
    read(s, "layers", c.frl.layers);
    read(s, "num_candidates", c.frl.num_candidates);
    read(s, "dropout", c.frl.dropout);
  }
  if (j.contains("eam")) {
    const auto& s = j["eam"];
    check_keys(s, "eam",
               {"enabled", "energy", "pooling", "hidden", "k", "eta", "sigma2", "buffer_capacity", "reuse_prob", "reg"});
    read(s, "enabled", c.eam.enabled);
    std::string energy = to_string(c.eam.energy);
    read(s, "energy", energy);
    c.eam.energy = parse_enum(energy, kEnergyNames, "energy");
    std::string pooling = to_string(c.eam.pooling);
    read(s, "pooling", pooling);
    c.eam.pooling = parse_enum(pooling, kPoolingNames, "pooling");
    read(s, "hidden", c.eam.hidden);
    read(s, "k", c.eam.steps);
    read(s, "eta", c.eam.step_size);
    read(s, "sigma2", c.eam.noise_var);
    read(s, "buffer_capacity", c.eam.buffer_capacity);
    read(s, "reuse_prob", c.eam.reuse_prob);
    read(s, "reg", c.eam.reg);
  }
  if (j.contains("loss")) {
    const auto& s = j["loss"];
    check_keys(s, "loss", {"kind", "lambda_sup", "lambda_eam"});
    std::string kind = to_string(c.loss);
    read(s, "kind", kind);
    c.loss = parse_enum(kind, kLossNames, "loss kind");
    read(s, "lambda_sup", c.lambda_sup);
    read(s, "lambda_eam", c.lambda_eam);
  }
  if (j.contains("train")) {
    const auto& s = j["train"];
    check_keys(s, "train",
               {"batch_size", "epochs", "max_steps", "lr", "weight_decay", "warmup", "beta1", "beta2", "eps",
                "eval_every", "seed"});
    read(s, "batch_size", c.train.batch_size);
    read(s, "epochs", c.train.epochs);
    read(s, "max_steps", c.train.max_steps);
    read(s, "lr", c.train.lr);
    read(s, "weight_decay", c.train.weight_decay);
    read(s, "warmup", c.train.warmup);
    read(s, "beta1", c.train.beta1);
    read(s, "beta2", c.train.beta2);
    read(s, "eps", c.train.eps);
    read(s, "eval_every", c.train.eval_every);
    read(s, "seed", c.seed);
  }
  if (j.contains("eval")) {
    const auto& s = j["eval"];
    check_keys(s, "eval", {"sample_seed"});
    read(s, "sample_seed", c.eval_seed);
  }

  require(c.dim >= 1 && c.frames >= 1, "model.dim and model.frames must be positive");
  require(c.radius_init_std >= 0.0, "model.radius_init_std must be non-negative");
  require(c.fusion.proj_dim >= 0, "fusion.proj_dim must be non-negative");
  require(c.fusion.dropout >= 0.0 && c.fusion.dropout < 1.0, "fusion.dropout must lie in [0, 1)");
  require(c.frl.heads >= 1 && c.frl.layers >= 1, "frl.heads and frl.layers must be at least 1");
  require(c.frl.num_candidates >= 0, "frl.num_candidates must be non-negative");
  require(c.frl.dropout >= 0.0 && c.frl.dropout < 1.0, "frl.dropout must lie in [0, 1)");
  require(c.eam.hidden >= 0, "eam.hidden must be non-negative");
  require(c.eam.steps >= 1, "eam.k must be at least 1");
  require(c.eam.step_size >= 0.0 && c.eam.noise_var >= 0.0, "eam.eta and eam.sigma2 must be non-negative");
  require(c.eam.buffer_capacity >= 1, "eam.buffer_capacity must be at least 1");
  require(c.eam.reuse_prob >= 0.0 && c.eam.reuse_prob <= 1.0, "eam.reuse_prob must lie in [0, 1]");
  require(c.train.batch_size >= 1, "train.batch_size must be at least 1");
  require(c.train.epochs >= 1 || c.train.max_steps >= 1, "train needs epochs or max_steps");
  require(c.train.max_steps >= 0, "train.max_steps must be non-negative");
  require(c.train.lr >= 0.0 && c.train.weight_decay >= 0.0, "train.lr and train.weight_decay must be non-negative");
  require(c.train.warmup >= 0.0 && c.train.warmup <= 1.0, "train.warmup must lie in [0, 1]");
  require(c.train.eval_every >= 0, "train.eval_every must be non-negative");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("malformed config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config '" + path + "'");
  out << to_json(cfg).dump(2) << '\n';
}

void apply_override(nlohmann::json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) throw InvalidArgument("override must look like section.key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  const auto dot = key.find('.');
  if (dot == std::string::npos) throw InvalidArgument("override key must be section.key: '" + key + "'");
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  const std::string section = key.substr(0, dot);
  const std::string field = key.substr(dot + 1);
  if (!j.contains(section) || !j[section].contains(field)) throw InvalidArgument("unknown config key '" + key + "'");
  j[section][field] = value;
}

RunConfig with_overrides(const RunConfig& cfg, const std::vector<std::string>& assignments) {
  nlohmann::json j = to_json(cfg);
  for (const std::string& a : assignments) apply_override(j, a);
  return config_from_json(j);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("data");
  const std::string text = j.dump();
  return fnv1a(text.data(), text.size());
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.dim = cfg.dim;
  m.frames = cfg.frames;
  m.adapters = cfg.adapters;
  m.radius_init_std = cfg.radius_init_std;
  m.fusion = cfg.fusion;
  m.frl = cfg.frl;
  m.energy = {cfg.eam.energy, cfg.eam.pooling, cfg.eam.hidden};
  m.init_seed = cfg.seed;
  return m;
}

LossConfig loss_config(const RunConfig& cfg) {
  LossConfig l;
  l.kind = cfg.loss;
  l.lambda_sup = cfg.lambda_sup;
  l.lambda_eam = cfg.lambda_eam;
  l.eam = cfg.eam.enabled;
  l.eam_reg = cfg.eam.reg;
  return l;
}

LangevinOptions langevin_options(const RunConfig& cfg) {
  return {cfg.eam.steps, cfg.eam.step_size, cfg.eam.noise_var};
}

}  // namespace tvr
