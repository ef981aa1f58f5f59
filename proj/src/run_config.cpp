#include "advrank/run_config.hpp"

#include <fstream>

namespace advrank {

namespace {

using nlohmann::json;

// Seed derivation tags; each sub-seed defaults to master ^ tag so distinct
// stages never share a stream unless the user asks for it.
constexpr std::uint64_t kDatasetTag = 0xD5A7A5E7ull;
constexpr std::uint64_t kSplitTag = 0x5EED5917ull;
constexpr std::uint64_t kTrainTag = 0x7A119AB5ull;
constexpr std::uint64_t kAttackTag = 0xA77AC915ull;
constexpr std::uint64_t kNoiseTag = 0x015E0153ull;
constexpr std::uint64_t kE2Tag = 0xE2E2E2E2ull;

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config: field '") + key + "' has the wrong type");
  }
}

std::uint64_t seed_or(const json& j, const char* key, std::uint64_t derived) {
  if (!j.contains(key) || j.at(key).is_null()) return derived;
  return j.at(key).get<std::uint64_t>();
}

}  // namespace

RunConfig parse_run_config(const json& j, std::optional<std::uint64_t> seed_override) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");

  RunConfig cfg;
  cfg.version = get_or(j, "version", 1);
  if (cfg.version != 1)
    throw ConfigError("config: unsupported version " + std::to_string(cfg.version));
  cfg.seed = seed_override ? *seed_override : get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.workers = get_or(j, "workers", 0);
  if (cfg.workers < 0) throw ConfigError("config: workers must be >= 0");

  const json jd = j.contains("dataset") ? j.at("dataset") : json::object();
  cfg.dataset.generator = get_or<std::string>(jd, "generator", cfg.dataset.generator);
  cfg.dataset.n = get_or(jd, "n", cfg.dataset.n);
  cfg.dataset.num_classes = get_or(jd, "num_classes", cfg.dataset.num_classes);
  cfg.dataset.dim = get_or(jd, "dim", cfg.dataset.dim);
  cfg.dataset.spread = get_or(jd, "spread", cfg.dataset.spread);
  cfg.dataset.test_fraction = get_or(jd, "test_fraction", cfg.dataset.test_fraction);
  cfg.dataset.seed = seed_or(jd, "seed", cfg.seed ^ kDatasetTag);
  cfg.dataset.split_seed = seed_or(jd, "split_seed", cfg.seed ^ kSplitTag);
  cfg.dataset.idx_images = get_or<std::string>(jd, "idx_images", "");
  cfg.dataset.idx_labels = get_or<std::string>(jd, "idx_labels", "");
  cfg.dataset.idx_limit = get_or(jd, "idx_limit", 0);
  cfg.dataset.downsample_to = get_or(jd, "downsample_to", 0);
  if (cfg.dataset.generator != "blobs" && cfg.dataset.generator != "rings" &&
      cfg.dataset.generator != "idx")
    throw ConfigError("config: unknown dataset generator '" + cfg.dataset.generator + "'");

  const json jz = j.contains("zoo") ? j.at("zoo") : json::object();
  cfg.zoo.victim = get_or<std::string>(jz, "victim", "cnn-small");
  cfg.zoo.surrogate = get_or<std::string>(jz, "surrogate", "mlp-wide");
  cfg.zoo.f0 = get_or<std::vector<std::string>>(jz, "f0", {"mlp-narrow", "mlp-deep", "cnn-pool"});
  for (const std::string& name : {cfg.zoo.victim, cfg.zoo.surrogate})
    if (!is_known_architecture(name)) throw ConfigError("config: unknown architecture '" + name + "'");
  for (const std::string& name : cfg.zoo.f0)
    if (!is_known_architecture(name)) throw ConfigError("config: unknown architecture '" + name + "'");
  if (cfg.zoo.f0.empty()) throw ConfigError("config: f0 must be nonempty");

  // victim, surrogate and every F0 member must be pairwise distinct
  std::vector<std::string> all{cfg.zoo.victim, cfg.zoo.surrogate};
  all.insert(all.end(), cfg.zoo.f0.begin(), cfg.zoo.f0.end());
  for (std::size_t a = 0; a < all.size(); ++a)
    for (std::size_t b = a + 1; b < all.size(); ++b)
      if (all[a] == all[b])
        throw ConfigError("config: architecture '" + all[a] +
                          "' used for more than one role");

  const json jt = j.contains("train") ? j.at("train") : json::object();
  cfg.train.epochs = get_or(jt, "epochs", cfg.train.epochs);
  cfg.train.learning_rate = get_or(jt, "learning_rate", cfg.train.learning_rate);
  cfg.train.momentum = get_or(jt, "momentum", cfg.train.momentum);
  cfg.train.batch_size = get_or(jt, "batch_size", cfg.train.batch_size);
  cfg.train.seed = static_cast<std::int64_t>(seed_or(jt, "seed", cfg.seed ^ kTrainTag));
  validate(cfg.train);

  const json ja = j.contains("attack") ? j.at("attack") : json::object();
  cfg.attack.kind = attack_kind_from_name(get_or<std::string>(ja, "kind", "pgd"));
  cfg.attack.epsilon = get_or(ja, "epsilon", 0.06f);
  cfg.attack.steps = get_or(ja, "steps", cfg.attack.kind == AttackKind::fgsm ? 1 : 10);
  cfg.attack.step_size = get_or(ja, "step_size", cfg.attack.kind == AttackKind::fgsm
                                                     ? cfg.attack.epsilon
                                                     : cfg.attack.epsilon / 4.0f);
  cfg.attack.random_start =
      get_or(ja, "random_start", cfg.attack.kind != AttackKind::fgsm);
  cfg.attack.mu = get_or(ja, "mu", 1.0f);
  cfg.attack.seed = static_cast<std::int64_t>(seed_or(ja, "seed", cfg.seed ^ kAttackTag));
  validate(cfg.attack);

  const json js = j.contains("strategies")
                      ? j.at("strategies")
                      : json::array({"aet", "het", "softmax", "softmax_noise"});
  for (const auto& name : js) cfg.strategies.push_back(strategy_from_name(name.get<std::string>()));

  cfg.k_anchors = get_or(j, "k_anchors", cfg.k_anchors);
  for (double a : cfg.k_anchors)
    if (a <= 0.0 || a > 1.0) throw ConfigError("config: k_anchors must lie in (0,1]");

  const json jn = j.contains("noise") ? j.at("noise") : json::object();
  cfg.noise.std = get_or(jn, "std", cfg.noise.std);
  cfg.noise.draws = get_or(jn, "draws", cfg.noise.draws);
  cfg.noise.seed = seed_or(jn, "seed", cfg.seed ^ kNoiseTag);
  if (cfg.noise.std < 0.0f) throw ConfigError("config: noise std must be >= 0");
  if (cfg.noise.draws < 1) throw ConfigError("config: noise draws must be >= 1");

  const json je = j.contains("e2") ? j.at("e2") : json::object();
  cfg.e2.perturbations = get_or(je, "perturbations", cfg.e2.perturbations);
  cfg.e2.trials = get_or(je, "trials", cfg.e2.trials);
  cfg.e2.seed = seed_or(je, "seed", cfg.seed ^ kE2Tag);
  cfg.e2.steps = get_or(je, "steps", 0);
  cfg.e2.step_size = get_or(je, "step_size", 0.0f);
  if (cfg.e2.perturbations < 1) throw ConfigError("config: e2 perturbations must be >= 1");
  if (cfg.e2.trials < 1) throw ConfigError("config: e2 trials must be >= 1");
  if (cfg.e2.steps < 0) throw ConfigError("config: e2 steps must be >= 0");
  if (cfg.e2.steps > 0 || cfg.e2.step_size > 0.0f) {
    AttackConfig probe = cfg.attack;
    if (cfg.e2.steps > 0) probe.steps = cfg.e2.steps;
    if (cfg.e2.step_size > 0.0f) probe.step_size = cfg.e2.step_size;
    validate(probe);
  }

  return cfg;
}

AttackConfig e2_attack(const RunConfig& cfg) {
  AttackConfig attack = cfg.attack;
  if (cfg.e2.steps > 0) attack.steps = cfg.e2.steps;
  if (cfg.e2.step_size > 0.0f) attack.step_size = cfg.e2.step_size;
  return attack;
}

RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_run_config(j, seed_override);
}

json to_json(const RunConfig& cfg) {
  json js = json::array();
  for (Strategy s : cfg.strategies) js.push_back(strategy_name(s));
  return json{
      {"version", cfg.version},
      {"seed", cfg.seed},
      {"workers", cfg.workers},
      {"dataset",
       {{"generator", cfg.dataset.generator},
        {"n", cfg.dataset.n},
        {"num_classes", cfg.dataset.num_classes},
        {"dim", cfg.dataset.dim},
        {"spread", cfg.dataset.spread},
        {"test_fraction", cfg.dataset.test_fraction},
        {"seed", cfg.dataset.seed},
        {"split_seed", cfg.dataset.split_seed},
        {"idx_images", cfg.dataset.idx_images},
        {"idx_labels", cfg.dataset.idx_labels},
        {"idx_limit", cfg.dataset.idx_limit},
        {"downsample_to", cfg.dataset.downsample_to}}},
      {"zoo", {{"victim", cfg.zoo.victim}, {"surrogate", cfg.zoo.surrogate}, {"f0", cfg.zoo.f0}}},
      {"train",
       {{"epochs", cfg.train.epochs},
        {"learning_rate", cfg.train.learning_rate},
        {"momentum", cfg.train.momentum},
        {"batch_size", cfg.train.batch_size},
        {"seed", cfg.train.seed}}},
      {"attack",
       {{"kind", attack_kind_name(cfg.attack.kind)},
        {"epsilon", cfg.attack.epsilon},
        {"steps", cfg.attack.steps},
        {"step_size", cfg.attack.step_size},
        {"random_start", cfg.attack.random_start},
        {"mu", cfg.attack.mu},
        {"seed", cfg.attack.seed}}},
      {"strategies", js},
      {"k_anchors", cfg.k_anchors},
      {"noise", {{"std", cfg.noise.std}, {"draws", cfg.noise.draws}, {"seed", cfg.noise.seed}}},
      {"e2",
       {{"perturbations", cfg.e2.perturbations},
        {"trials", cfg.e2.trials},
        {"seed", cfg.e2.seed},
        {"steps", cfg.e2.steps},
        {"step_size", cfg.e2.step_size}}},
  };
}

json demo_config_json() {
  return json{
      {"version", 1},
      {"seed", 42},
      {"dataset",
       {{"generator", "blobs"},
        {"n", 4000},
        {"num_classes", 4},
        {"dim", 16},
        {"spread", 0.2},
        {"test_fraction", 0.2}}},
      {"zoo",
       {{"victim", "cnn-small"},
        {"surrogate", "mlp-wide"},
        {"f0", {"mlp-narrow", "mlp-deep", "cnn-pool"}}}},
      {"train",
       {{"epochs", 25},
        {"learning_rate", 0.1},
        {"momentum", 0.9},
        {"batch_size", 32}}},
      {"attack",
       {{"kind", "pgd"}, {"epsilon", 0.08}, {"steps", 10}, {"random_start", true}}},
      {"strategies", {"aet", "het", "softmax", "softmax_noise"}},
      {"k_anchors", {0.05, 0.10, 0.20}},
      {"e2", {{"perturbations", 20}, {"trials", 100}, {"steps", 3}, {"step_size", 0.02}}},
  };
}

std::pair<Dataset, Dataset> build_dataset(const DatasetSpec& spec) {
  Dataset full;
  if (spec.generator == "blobs") {
    full = gen_blobs(spec.n, spec.num_classes, spec.dim, spec.spread, spec.seed);
  } else if (spec.generator == "rings") {
    full = gen_rings(spec.n, spec.seed);
  } else {
    full = load_idx(spec.idx_images, spec.idx_labels, spec.idx_limit, spec.downsample_to);
  }
  return split_train_test(full, spec.test_fraction, spec.split_seed);
}

std::int64_t arch_train_seed(const RunConfig& cfg, const std::string& arch) {
  const auto& names = architecture_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == arch) return cfg.train.seed + static_cast<std::int64_t>(i);
  throw ConfigError("unknown architecture '" + arch + "'");
}

}  // namespace advrank
