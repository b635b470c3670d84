#include "w2a/pipeline/config.h"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "w2a/numerics/errors.h"

namespace w2a::pipeline {
namespace {

using nlohmann::ordered_json;

// One JSON object of the config. Every key read is recorded so Finish() can
// reject the rest.
class Section {
 public:
  Section(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + Name() + "' must be an object");
  }

  template <typename T>
  void Read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    const std::string where = Name(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError("'" + where + "' must be a boolean");
      out = it->template get<bool>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("'" + where + "' must be a number");
      out = it->template get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!it->is_number_unsigned()) throw ConfigError("'" + where + "' must be a non-negative integer");
      out = it->template get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError("'" + where + "' must be an integer");
      out = it->template get<T>();
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      if (!it->is_string()) throw ConfigError("'" + where + "' must be a string");
      out = it->template get<std::string>();
    } else {
      static_assert(std::is_same_v<T, std::string>);
      if (!it->is_string()) throw ConfigError("'" + where + "' must be a string");
      out = it->template get<std::string>();
    }
  }

  const ordered_json* Child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string Name(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void Finish() const {
    for (const auto& [key, unused] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + Name(key) + "'");
    }
  }

 private:
  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ordered_json ContrastiveJson(const align::ContrastiveConfig& c) {
  ordered_json j;
  j["variant"] = std::string(align::VariantName(c.variant));
  j["temperature"] = c.temperature;
  j["margin"] = c.margin;
  return j;
}

void ReadContrastive(const ordered_json& j, const std::string& path, align::ContrastiveConfig& c) {
  Section s(j, path);
  std::string variant(align::VariantName(c.variant));
  s.Read("variant", variant);
  const auto parsed = align::ParseVariant(variant);
  if (!parsed) throw ConfigError("unknown contrastive variant '" + variant + "'");
  c.variant = *parsed;
  s.Read("temperature", c.temperature);
  s.Read("margin", c.margin);
  s.Finish();
}

std::optional<worldmodel::ArtifactMode> ParseArtifactMode(std::string_view name) {
  for (auto m : {worldmodel::ArtifactMode::kNone, worldmodel::ArtifactMode::kLatentNoise,
                 worldmodel::ArtifactMode::kObjectDropout}) {
    if (worldmodel::ArtifactModeName(m) == name) return m;
  }
  return std::nullopt;
}

}  // namespace

void RunConfig::PropagateSeed() {
  stage1.seed = seed;
  stage2.seed = seed;
  bc.seed = seed;
  idm.seed = seed;
  idm_baseline.seed = seed;
}

void RunConfig::Validate() const {
  if (version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  if (env.chunk_count < 1 || env.chunk_size < 1) throw ConfigError("env needs T >= 1 and M >= 1");
  if (static_cast<std::size_t>(env.chunk_size) != stage1.adapter.chunk_size) {
    throw ConfigError("env.chunk_size must match the adapter chunk size");
  }
  stage1.Validate();
  stage2.Validate();
  if (bc.epochs < 0 || bc.batch_size == 0 || !(bc.lr > 0.0) || bc.label_noise < 0.0) {
    throw ConfigError("invalid bc settings");
  }
  if (artifact.noise_sigma < 0.0 || artifact.dropout_prob < 0.0 || artifact.dropout_prob > 1.0) {
    throw ConfigError("artifact parameters out of range");
  }
  if (idm.steps < 0 || idm.batch_size == 0 || !(idm.lr > 0.0) || idm.hidden == 0) {
    throw ConfigError("invalid idm settings");
  }
  if (idm_baseline.instructions < 1 || idm_baseline.finetune_steps < 0 ||
      idm_baseline.batch_size == 0 || !(idm_baseline.lr > 0.0)) {
    throw ConfigError("invalid idm_baseline settings");
  }
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
}

RunConfig DefaultRunConfig() {
  RunConfig c;
  c.PropagateSeed();
  return c;
}

std::string SerializeConfig(const RunConfig& c) {
  ordered_json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["paths"] = {{"demos", c.paths.demos.string()},
                {"checkpoints", c.paths.checkpoints.string()},
                {"metrics", c.paths.metrics.string()}};
  j["env"] = {{"chunk_count", c.env.chunk_count},
              {"chunk_size", c.env.chunk_size},
              {"grasp_radius", c.env.grasp_radius},
              {"goal_radius", c.env.goal_radius},
              {"grasp_aperture_threshold", c.env.grasp_aperture_threshold}};
  j["stage1"] = {{"batch_size", c.stage1.batch_size},
                 {"hard_negative_ratio", c.stage1.hard_negative_ratio},
                 {"steps", c.stage1.steps},
                 {"lr", c.stage1.lr},
                 {"holdout_fraction", c.stage1.holdout_fraction},
                 {"contrastive", ContrastiveJson(c.stage1.contrastive)}};
  j["stage2"] = {{"parallel_rollouts", c.stage2.parallel_rollouts},
                 {"iterations", c.stage2.iterations},
                 {"lr", c.stage2.lr},
                 {"eval_every", c.stage2.eval_every},
                 {"eval_episodes", c.stage2.eval_episodes},
                 {"terminate_on_success", c.stage2.terminate_on_success},
                 {"contrastive", ContrastiveJson(c.stage2.contrastive)}};
  j["bc"] = {{"epochs", c.bc.epochs},
             {"batch_size", c.bc.batch_size},
             {"lr", c.bc.lr},
             {"stride", c.bc.stride},
             {"demo_count", c.bc.demo_count},
             {"label_noise", c.bc.label_noise}};
  j["artifact"] = {{"mode", std::string(worldmodel::ArtifactModeName(c.artifact.mode))},
                   {"noise_sigma", c.artifact.noise_sigma},
                   {"dropout_prob", c.artifact.dropout_prob}};
  j["idm"] = {{"steps", c.idm.steps},
              {"batch_size", c.idm.batch_size},
              {"lr", c.idm.lr},
              {"hidden", c.idm.hidden}};
  j["idm_baseline"] = {{"instructions", c.idm_baseline.instructions},
                       {"finetune_steps", c.idm_baseline.finetune_steps},
                       {"batch_size", c.idm_baseline.batch_size},
                       {"lr", c.idm_baseline.lr}};
  j["eval"] = {{"episodes", c.eval_episodes}, {"seed", c.eval_seed}};
  return j.dump(2) + "\n";
}

RunConfig ParseConfig(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(j, "");
  root.Read("version", c.version);
  if (c.version != kConfigVersion) {
    throw ConfigError("unsupported config version " + std::to_string(c.version));
  }
  root.Read("seed", c.seed);
  if (const auto* p = root.Child("paths")) {
    Section s(*p, "paths");
    s.Read("demos", c.paths.demos);
    s.Read("checkpoints", c.paths.checkpoints);
    s.Read("metrics", c.paths.metrics);
    s.Finish();
  }
  if (const auto* p = root.Child("env")) {
    Section s(*p, "env");
    s.Read("chunk_count", c.env.chunk_count);
    s.Read("chunk_size", c.env.chunk_size);
    s.Read("grasp_radius", c.env.grasp_radius);
    s.Read("goal_radius", c.env.goal_radius);
    s.Read("grasp_aperture_threshold", c.env.grasp_aperture_threshold);
    s.Finish();
    if (c.env.chunk_size > 0) c.stage1.adapter.chunk_size = static_cast<std::size_t>(c.env.chunk_size);
  }
  if (const auto* p = root.Child("stage1")) {
    Section s(*p, "stage1");
    s.Read("batch_size", c.stage1.batch_size);
    s.Read("hard_negative_ratio", c.stage1.hard_negative_ratio);
    s.Read("steps", c.stage1.steps);
    s.Read("lr", c.stage1.lr);
    s.Read("holdout_fraction", c.stage1.holdout_fraction);
    if (const auto* q = s.Child("contrastive")) ReadContrastive(*q, "stage1.contrastive", c.stage1.contrastive);
    s.Finish();
  }
  if (const auto* p = root.Child("stage2")) {
    Section s(*p, "stage2");
    s.Read("parallel_rollouts", c.stage2.parallel_rollouts);
    s.Read("iterations", c.stage2.iterations);
    s.Read("lr", c.stage2.lr);
    s.Read("eval_every", c.stage2.eval_every);
    s.Read("eval_episodes", c.stage2.eval_episodes);
    s.Read("terminate_on_success", c.stage2.terminate_on_success);
    if (const auto* q = s.Child("contrastive")) ReadContrastive(*q, "stage2.contrastive", c.stage2.contrastive);
    s.Finish();
  }
  if (const auto* p = root.Child("bc")) {
    Section s(*p, "bc");
    s.Read("epochs", c.bc.epochs);
    s.Read("batch_size", c.bc.batch_size);
    s.Read("lr", c.bc.lr);
    s.Read("stride", c.bc.stride);
    s.Read("demo_count", c.bc.demo_count);
    s.Read("label_noise", c.bc.label_noise);
    s.Finish();
  }
  if (const auto* p = root.Child("artifact")) {
    Section s(*p, "artifact");
    std::string mode(worldmodel::ArtifactModeName(c.artifact.mode));
    s.Read("mode", mode);
    const auto parsed = ParseArtifactMode(mode);
    if (!parsed) throw ConfigError("unknown artifact mode '" + mode + "'");
    c.artifact.mode = *parsed;
    s.Read("noise_sigma", c.artifact.noise_sigma);
    s.Read("dropout_prob", c.artifact.dropout_prob);
    s.Finish();
  }
  if (const auto* p = root.Child("idm")) {
    Section s(*p, "idm");
    s.Read("steps", c.idm.steps);
    s.Read("batch_size", c.idm.batch_size);
    s.Read("lr", c.idm.lr);
    s.Read("hidden", c.idm.hidden);
    s.Finish();
  }
  if (const auto* p = root.Child("idm_baseline")) {
    Section s(*p, "idm_baseline");
    s.Read("instructions", c.idm_baseline.instructions);
    s.Read("finetune_steps", c.idm_baseline.finetune_steps);
    s.Read("batch_size", c.idm_baseline.batch_size);
    s.Read("lr", c.idm_baseline.lr);
    s.Finish();
  }
  if (const auto* p = root.Child("eval")) {
    Section s(*p, "eval");
    s.Read("episodes", c.eval_episodes);
    s.Read("seed", c.eval_seed);
    s.Finish();
  }
  root.Finish();
  c.PropagateSeed();
  c.Validate();
  return c;
}

void ApplySeedOverride(RunConfig& c) {
  const char* env = std::getenv(kSeedEnvVar);
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0' || env[0] == '-') {
    throw ConfigError(std::string(kSeedEnvVar) + " is not an unsigned integer: '" + env + "'");
  }
  c.seed = v;
  c.PropagateSeed();
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig c = ParseConfig(buffer.str());
  ApplySeedOverride(c);
  return c;
}

void SaveRunConfig(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << SerializeConfig(config);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace w2a::pipeline
