#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "advrank/eval.hpp"
#include "advrank/parallel.hpp"
#include "advrank/run_config.hpp"

namespace fs = std::filesystem;
using advrank::RunConfig;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  int workers = -1;  // -1: take from config
};

int effective_workers(const RunConfig& cfg, const CliOptions& opt) {
  const int w = opt.workers >= 0 ? opt.workers : cfg.workers;
  return w == 0 ? advrank::default_workers() : w;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw advrank::ParseError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

fs::path models_dir(const CliOptions& opt) { return fs::path(opt.out_dir) / "models"; }

std::vector<std::string> unique_archs(const RunConfig& cfg) {
  std::vector<std::string> archs{cfg.zoo.victim, cfg.zoo.surrogate};
  archs.insert(archs.end(), cfg.zoo.f0.begin(), cfg.zoo.f0.end());
  return archs;  // roles are pairwise distinct by config validation
}

// Deterministic end-to-end: build + train each configured architecture on the
// train split, record clean accuracy on the test split.
std::map<std::string, advrank::ModelBundle> train_models(const RunConfig& cfg,
                                                         const advrank::Dataset& train_set,
                                                         const advrank::Dataset& test_set) {
  std::map<std::string, advrank::ModelBundle> models;
  for (const std::string& arch : unique_archs(cfg)) {
    const std::int64_t seed = advrank::arch_train_seed(cfg, arch);
    advrank::ModelBundle bundle;
    bundle.arch = arch;
    bundle.train_seed = seed;
    bundle.net = advrank::build(arch, train_set.inputs[0].shape, train_set.num_classes,
                                static_cast<std::uint64_t>(seed));
    advrank::TrainConfig tc = cfg.train;
    tc.seed = seed;
    advrank::train(bundle.net, train_set, tc);
    bundle.clean_test_accuracy = static_cast<float>(advrank::accuracy(bundle.net, test_set));
    models.emplace(arch, std::move(bundle));
  }
  return models;
}

advrank::ModelBundle load_model(const CliOptions& opt, const std::string& arch) {
  const fs::path path = models_dir(opt) / (arch + ".trnk");
  if (!fs::exists(path))
    throw advrank::ConfigError("missing model file " + path.string() + "; run `train` first");
  advrank::ModelBundle bundle = advrank::load_bundle(path.string());
  if (bundle.arch != arch)
    throw advrank::ParseError("model file " + path.string() + " holds architecture '" +
                              bundle.arch + "'");
  return bundle;
}

advrank::ExperimentSetup make_setup(const RunConfig& cfg, const advrank::Dataset& test_set,
                                    std::map<std::string, advrank::ModelBundle>& models,
                                    int workers) {
  advrank::ExperimentSetup setup;
  setup.test = &test_set;
  setup.victim = std::shared_ptr<const advrank::Network>(&models.at(cfg.zoo.victim).net,
                                                         [](const advrank::Network*) {});
  setup.victim_arch = cfg.zoo.victim;
  setup.surrogate = std::shared_ptr<const advrank::Network>(&models.at(cfg.zoo.surrogate).net,
                                                            [](const advrank::Network*) {});
  setup.surrogate_arch = cfg.zoo.surrogate;
  std::vector<std::shared_ptr<const advrank::Network>> members;
  for (const std::string& arch : cfg.zoo.f0)
    members.push_back(std::shared_ptr<const advrank::Network>(&models.at(arch).net,
                                                              [](const advrank::Network*) {}));
  setup.f0 = advrank::make_ensemble(members, cfg.zoo.f0, setup.victim.get(), cfg.zoo.victim);
  setup.attack = cfg.attack;
  setup.strategies = cfg.strategies;
  setup.noise_std = cfg.noise.std;
  setup.noise_draws = cfg.noise.draws;
  setup.noise_seed = cfg.noise.seed;
  setup.workers = workers;
  return setup;
}

json report_manifest(const RunConfig& cfg, const advrank::EvaluationReport& report) {
  json j{{"config", advrank::to_json(cfg)},
         {"experiment", report.experiment},
         {"victim", report.victim_arch},
         {"surrogate", report.surrogate_arch},
         {"f0", report.f0_archs},
         {"test_size", report.test_size},
         {"retained", report.retained},
         {"retained_fraction", report.retained_fraction},
         {"surrogate_fooling_rate", report.surrogate_fooling_rate},
         {"lower_bound", report.lower}};
  if (report.experiment == "e2") {
    j["perturbations"] = report.e2_perturbations;
    j["trials"] = report.e2_trials;
  }
  return j;
}

int cmd_train(const RunConfig& cfg, const CliOptions& opt) {
  auto [train_set, test_set] = advrank::build_dataset(cfg.dataset);
  auto models = train_models(cfg, train_set, test_set);
  fs::create_directories(models_dir(opt));

  json entries = json::array();
  for (const std::string& arch : unique_archs(cfg)) {
    const advrank::ModelBundle& bundle = models.at(arch);
    const fs::path path = models_dir(opt) / (arch + ".trnk");
    advrank::save_bundle(bundle, path.string());
    entries.push_back(json{{"arch", arch},
                           {"file", path.filename().string()},
                           {"train_seed", bundle.train_seed},
                           {"clean_test_accuracy", bundle.clean_test_accuracy}});
    std::cout << "trained " << arch << "  test accuracy "
              << advrank::format_value(bundle.clean_test_accuracy) << "\n";
  }
  write_json(fs::path(opt.out_dir) / "train_manifest.json",
             json{{"command", "train"},
                  {"config", advrank::to_json(cfg)},
                  {"train_size", train_set.size()},
                  {"test_size", test_set.size()},
                  {"models", entries}});
  return 0;
}

int cmd_attack(const RunConfig& cfg, const CliOptions& opt) {
  auto [train_set, test_set] = advrank::build_dataset(cfg.dataset);
  const advrank::ModelBundle victim = load_model(opt, cfg.zoo.victim);
  const advrank::ModelBundle surrogate = load_model(opt, cfg.zoo.surrogate);

  const advrank::EvalSet eval = advrank::filter_correct(test_set, victim.net);
  if (eval.base.size() == 0) throw advrank::ConfigError("victim classifies nothing correctly");
  const auto dstar =
      advrank::attack_dataset(surrogate.net, eval, cfg.attack, effective_workers(cfg, opt));

  const fs::path path = fs::path(opt.out_dir) / "dstar.tadv";
  advrank::save_attacks(path.string(), cfg.attack, dstar);
  write_json(fs::path(opt.out_dir) / "attack_manifest.json",
             json{{"command", "attack"},
                  {"config", advrank::to_json(cfg)},
                  {"test_size", test_set.size()},
                  {"eval_retained", eval.base.size()},
                  {"retained_fraction", eval.retained_fraction},
                  {"examples", dstar.size()},
                  {"surrogate_fooling_rate", advrank::fooling_rate(dstar)},
                  {"file", path.filename().string()}});
  std::cout << "attacked " << dstar.size() << " samples, surrogate fooling rate "
            << advrank::format_value(advrank::fooling_rate(dstar)) << "\n";
  return 0;
}

int cmd_rank(const RunConfig& cfg, const CliOptions& opt) {
  auto [train_set, test_set] = advrank::build_dataset(cfg.dataset);
  const advrank::ModelBundle surrogate = load_model(opt, cfg.zoo.surrogate);
  std::map<std::string, advrank::ModelBundle> f0_models;
  for (const std::string& arch : cfg.zoo.f0) f0_models.emplace(arch, load_model(opt, arch));

  const fs::path attack_path = fs::path(opt.out_dir) / "dstar.tadv";
  const advrank::AttackFile file = advrank::load_attacks(attack_path.string());
  const auto examples = advrank::resolve_attacks(file, test_set, surrogate.net);
  if (examples.empty()) throw advrank::ConfigError("attack file holds no examples");

  std::vector<std::shared_ptr<const advrank::Network>> members;
  for (const std::string& arch : cfg.zoo.f0)
    members.push_back(std::shared_ptr<const advrank::Network>(&f0_models.at(arch).net,
                                                              [](const advrank::Network*) {}));
  const advrank::SurrogateEnsemble f0 =
      advrank::make_ensemble(members, cfg.zoo.f0, nullptr, cfg.zoo.victim);

  const int workers = effective_workers(cfg, opt);
  std::vector<std::pair<std::string, advrank::RankedSet>> ranked;
  for (advrank::Strategy s : cfg.strategies) {
    std::vector<advrank::RankingScore> scores(examples.size());
    advrank::parallel_for(examples.size(), workers, [&](std::size_t i) {
      const auto& ex = examples[i];
      switch (s) {
        case advrank::Strategy::aet: scores[i] = advrank::aet(ex, f0); break;
        case advrank::Strategy::het: scores[i] = advrank::het(ex, f0); break;
        case advrank::Strategy::softmax:
          scores[i] =
              advrank::softmax_baseline(ex.clean, ex.label, surrogate.net, ex.sample_index);
          break;
        case advrank::Strategy::softmax_noise:
          scores[i] = advrank::noise_baseline(ex.clean, ex.label, surrogate.net, cfg.noise.std,
                                              cfg.noise.draws, cfg.noise.seed + i,
                                              ex.sample_index);
          break;
      }
    });
    if (s == advrank::Strategy::softmax_noise) advrank::minmax_normalize(scores);
    ranked.emplace_back(advrank::strategy_name(s), advrank::rank(scores));
  }

  const fs::path scores_path = fs::path(opt.out_dir) / "scores.csv";
  advrank::write_scores_csv(scores_path.string(), ranked);
  write_json(fs::path(opt.out_dir) / "rank_manifest.json",
             json{{"command", "rank"},
                  {"config", advrank::to_json(cfg)},
                  {"examples", examples.size()},
                  {"file", scores_path.filename().string()}});
  std::cout << "ranked " << examples.size() << " examples with " << ranked.size()
            << " strategies\n";
  return 0;
}

int run_protocol(const RunConfig& cfg, const CliOptions& opt, const std::string& which) {
  auto [train_set, test_set] = advrank::build_dataset(cfg.dataset);
  auto models = train_models(cfg, train_set, test_set);
  auto setup = make_setup(cfg, test_set, models, effective_workers(cfg, opt));
  if (which == "e2") setup.attack = advrank::e2_attack(cfg);

  const advrank::EvaluationReport report =
      which == "e1" ? advrank::run_e1(setup, cfg.k_anchors)
                    : advrank::run_e2(setup, cfg.e2.perturbations, cfg.e2.trials, cfg.e2.seed);

  const fs::path csv = fs::path(opt.out_dir) / (which + "_results.csv");
  advrank::write_results_csv(csv.string(), report);
  json manifest = report_manifest(cfg, report);
  manifest["command"] = which;
  manifest["file"] = csv.filename().string();
  write_json(fs::path(opt.out_dir) / (which + "_manifest.json"), manifest);

  std::cout << which << ": lower bound " << advrank::format_value(report.lower);
  for (const auto& curve : report.strategies)
    std::cout << ", " << curve.strategy << "@k" << curve.ks.front() << " "
              << advrank::format_value(curve.values.front());
  std::cout << "\n";
  return 0;
}

int cmd_demo(const RunConfig& cfg, const CliOptions& opt) {
  write_json(fs::path(opt.out_dir) / "demo_config.json", advrank::to_json(cfg));
  if (int rc = cmd_train(cfg, opt)) return rc;
  if (int rc = cmd_attack(cfg, opt)) return rc;
  if (int rc = cmd_rank(cfg, opt)) return rc;
  if (int rc = run_protocol(cfg, opt, "e1")) return rc;
  if (int rc = run_protocol(cfg, opt, "e2")) return rc;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transferability ranking for adversarial examples"};
  app.require_subcommand(1);

  CliOptions opt;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    sub->add_option("--config", opt.config_path, "JSON run configuration")
        ->required(config_required);
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", seed_value, "override the master seed");
    sub->add_option("--workers", opt.workers, "worker threads (0 = all cores)");
  };

  CLI::App* train = app.add_subcommand("train", "train the model zoo and save weight files");
  CLI::App* attack = app.add_subcommand("attack", "generate adversarial examples");
  CLI::App* rank_cmd = app.add_subcommand("rank", "score and order a saved attack set");
  CLI::App* e1 = app.add_subcommand("e1", "sample-ranking experiment");
  CLI::App* e2 = app.add_subcommand("e2", "perturbation-ranking experiment");
  CLI::App* demo = app.add_subcommand("demo", "train, attack, rank, e1 and e2 end to end");
  for (CLI::App* sub : {train, attack, rank_cmd, e1, e2}) add_common(sub, true);
  add_common(demo, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  for (const CLI::App* sub : app.get_subcommands())
    if (sub->count("--seed") > 0) opt.seed = seed_value;

  try {
    RunConfig cfg = opt.config_path.empty()
                        ? advrank::parse_run_config(advrank::demo_config_json(), opt.seed)
                        : advrank::load_run_config(opt.config_path, opt.seed);
    fs::create_directories(opt.out_dir);

    if (train->parsed()) return cmd_train(cfg, opt);
    if (attack->parsed()) return cmd_attack(cfg, opt);
    if (rank_cmd->parsed()) return cmd_rank(cfg, opt);
    if (e1->parsed()) return run_protocol(cfg, opt, "e1");
    if (e2->parsed()) return run_protocol(cfg, opt, "e2");
    if (demo->parsed()) return cmd_demo(cfg, opt);
    return 2;
  } catch (const advrank::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const advrank::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
