#include "advrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <unordered_map>

#include "advrank/parallel.hpp"
#include "advrank/rng.hpp"

namespace advrank {

namespace {

// Maps example_index -> outcome and verifies the ranked order covers exactly
// the outcome keys.
std::unordered_map<int, const VictimOutcome*> outcome_index(
    const std::vector<VictimOutcome>& outcomes) {
  std::unordered_map<int, const VictimOutcome*> map;
  map.reserve(outcomes.size());
  for (const auto& o : outcomes)
    if (!map.emplace(o.example_index, &o).second)
      throw ConfigError("duplicate example index in outcomes");
  return map;
}

void check_cover(const RankedSet& ranked,
                 const std::unordered_map<int, const VictimOutcome*>& map) {
  if (ranked.order.size() != map.size())
    throw ConfigError("ranked set and outcomes differ in size");
  for (int idx : ranked.order)
    if (map.find(idx) == map.end())
      throw ConfigError("ranked index " + std::to_string(idx) + " has no outcome");
}

void check_architecture_separation(const ExperimentSetup& setup) {
  if (setup.victim_arch == setup.surrogate_arch)
    throw ConfigError("victim and surrogate share the architecture '" + setup.victim_arch + "'");
  for (const auto& name : setup.f0.member_arch_names)
    if (name == setup.victim_arch)
      throw ConfigError("victim architecture '" + name + "' appears in F0");
  for (const auto& member : setup.f0.members)
    if (member.get() == setup.victim.get())
      throw ConfigError("the victim network is a member of F0");
}

std::vector<RankingScore> score_examples(const std::vector<AdversarialExample>& examples,
                                         Strategy strategy, const ExperimentSetup& setup,
                                         std::uint64_t noise_seed_base) {
  std::vector<RankingScore> scores(examples.size());
  parallel_for(examples.size(), setup.workers, [&](std::size_t i) {
    const AdversarialExample& ex = examples[i];
    switch (strategy) {
      case Strategy::aet: scores[i] = aet(ex, setup.f0); break;
      case Strategy::het: scores[i] = het(ex, setup.f0); break;
      case Strategy::softmax:
        scores[i] = softmax_baseline(ex.clean, ex.label, *setup.surrogate, ex.sample_index);
        break;
      case Strategy::softmax_noise:
        scores[i] = noise_baseline(ex.clean, ex.label, *setup.surrogate, setup.noise_std,
                                   setup.noise_draws, noise_seed_base + i, ex.sample_index);
        break;
    }
  });
  if (strategy == Strategy::softmax_noise) minmax_normalize(scores);
  return scores;
}

}  // namespace

std::vector<VictimOutcome> evaluate_victim(const Network& victim,
                                           const std::vector<AdversarialExample>& examples,
                                           int workers) {
  std::vector<VictimOutcome> outcomes(examples.size());
  parallel_for(examples.size(), workers, [&](std::size_t i) {
    const Tensor logits = forward(victim, examples[i].adversarial());
    const Tensor probs = softmax(logits);
    outcomes[i] = VictimOutcome{examples[i].sample_index,
                                argmax(logits) != examples[i].label,
                                static_cast<double>(probs.data[examples[i].label])};
  });
  return outcomes;
}

double transferability_at_k(const RankedSet& ranked, const std::vector<VictimOutcome>& outcomes,
                            int k) {
  if (outcomes.empty()) throw ConfigError("transferability_at_k: no outcomes");
  if (k < 1 || static_cast<std::size_t>(k) > outcomes.size())
    throw ConfigError("transferability_at_k: k out of range");
  const auto map = outcome_index(outcomes);
  check_cover(ranked, map);
  int transferred = 0;
  for (int i = 0; i < k; ++i)
    if (map.at(ranked.order[static_cast<std::size_t>(i)])->transferred) ++transferred;
  return static_cast<double>(transferred) / static_cast<double>(k);
}

double lower_bound(const std::vector<VictimOutcome>& outcomes) {
  if (outcomes.empty()) throw ConfigError("lower_bound: no outcomes");
  int transferred = 0;
  for (const auto& o : outcomes)
    if (o.transferred) ++transferred;
  return static_cast<double>(transferred) / static_cast<double>(outcomes.size());
}

TatKCurve upper_bound_curve(const std::vector<VictimOutcome>& outcomes,
                            const std::vector<int>& ks) {
  if (outcomes.empty()) throw ConfigError("upper_bound_curve: no outcomes");
  std::vector<const VictimOutcome*> order;
  order.reserve(outcomes.size());
  for (const auto& o : outcomes) order.push_back(&o);
  std::sort(order.begin(), order.end(), [](const VictimOutcome* a, const VictimOutcome* b) {
    if (a->transferred != b->transferred) return a->transferred;
    if (a->transferred) {
      // among successes the victim's residual confidence orders the "most
      // transferable" first; this affects only the stored order, not T@k
      if (a->victim_truth_confidence != b->victim_truth_confidence)
        return a->victim_truth_confidence < b->victim_truth_confidence;
    }
    return a->example_index < b->example_index;
  });

  TatKCurve curve;
  curve.strategy = "upper_bound";
  curve.ks = ks;
  for (int k : ks) {
    if (k < 1 || static_cast<std::size_t>(k) > order.size())
      throw ConfigError("upper_bound_curve: k out of range");
    int transferred = 0;
    for (int i = 0; i < k; ++i)
      if (order[static_cast<std::size_t>(i)]->transferred) ++transferred;
    curve.values.push_back(static_cast<double>(transferred) / static_cast<double>(k));
  }
  return curve;
}

TatKCurve strategy_curve(const std::string& name, const RankedSet& ranked,
                         const std::vector<VictimOutcome>& outcomes, const std::vector<int>& ks) {
  TatKCurve curve;
  curve.strategy = name;
  curve.ks = ks;
  for (int k : ks) curve.values.push_back(transferability_at_k(ranked, outcomes, k));
  return curve;
}

std::vector<int> k_grid(int n, const std::vector<double>& anchor_fractions) {
  if (n < 1) throw ConfigError("k_grid: empty set");
  std::vector<int> ks;
  for (int k = 1; k < n; k *= 2) ks.push_back(k);
  for (double f : anchor_fractions) {
    if (f <= 0.0 || f > 1.0) throw ConfigError("k_grid: anchor fraction out of (0,1]");
    int k = static_cast<int>(std::lround(f * static_cast<double>(n)));
    ks.push_back(std::min(n, std::max(1, k)));
  }
  ks.push_back(n);
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

EvaluationReport run_e1(const ExperimentSetup& setup, const std::vector<double>& k_anchors) {
  check_architecture_separation(setup);
  if (!setup.test || !setup.surrogate || !setup.victim)
    throw ConfigError("run_e1: incomplete setup");
  validate(setup.attack);

  const EvalSet eval = filter_correct(*setup.test, *setup.victim);
  if (eval.base.size() == 0) throw ConfigError("run_e1: the victim classifies nothing correctly");

  const std::vector<AdversarialExample> dstar =
      attack_dataset(*setup.surrogate, eval, setup.attack, setup.workers);
  const std::vector<VictimOutcome> outcomes =
      evaluate_victim(*setup.victim, dstar, setup.workers);
  const std::vector<int> ks = k_grid(static_cast<int>(dstar.size()), k_anchors);

  EvaluationReport report;
  report.experiment = "e1";
  report.lower = lower_bound(outcomes);
  report.upper = upper_bound_curve(outcomes, ks);
  for (Strategy s : setup.strategies) {
    const std::vector<RankingScore> scores =
        score_examples(dstar, s, setup, setup.noise_seed);
    report.strategies.push_back(strategy_curve(strategy_name(s), rank(scores), outcomes, ks));
  }

  report.victim_arch = setup.victim_arch;
  report.surrogate_arch = setup.surrogate_arch;
  report.f0_archs = setup.f0.member_arch_names;
  report.test_size = static_cast<int>(setup.test->size());
  report.retained = static_cast<int>(eval.base.size());
  report.retained_fraction = eval.retained_fraction;
  report.surrogate_fooling_rate = fooling_rate(dstar);
  return report;
}

EvaluationReport run_e2(const ExperimentSetup& setup, int m_perturbations, int n_trials,
                        std::uint64_t seed) {
  check_architecture_separation(setup);
  if (!setup.test || !setup.surrogate || !setup.victim)
    throw ConfigError("run_e2: incomplete setup");
  validate(setup.attack);
  if (!setup.attack.random_start)
    throw ConfigError("run_e2: the attack must use random starts");
  if (m_perturbations < 1) throw ConfigError("run_e2: need at least one perturbation");
  if (n_trials < 1) throw ConfigError("run_e2: need at least one trial");

  const EvalSet eval = filter_correct(*setup.test, *setup.victim);
  if (eval.base.size() < static_cast<std::size_t>(n_trials))
    throw ConfigError("run_e2: fewer victim-correct samples than trials");

  // Trial samples: uniform without replacement over the victim-correct set.
  std::vector<int> positions(eval.base.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  Rng rng(seed);
  shuffle(positions.data(), positions.size(), rng);
  positions.resize(static_cast<std::size_t>(n_trials));

  const std::size_t n_strategies = setup.strategies.size();
  std::vector<int> strategy_hits(n_strategies, 0);
  std::vector<int> all_hits(static_cast<std::size_t>(n_trials), 0);
  std::vector<int> any_hit(static_cast<std::size_t>(n_trials), 0);
  std::vector<std::vector<int>> per_trial_hits(static_cast<std::size_t>(n_trials),
                                               std::vector<int>(n_strategies, 0));
  std::size_t fooled_surrogate = 0;

  std::mutex agg_mutex;
  parallel_for(static_cast<std::size_t>(n_trials), setup.workers, [&](std::size_t t) {
    const std::size_t p = static_cast<std::size_t>(positions[t]);
    const Tensor& x = eval.base.inputs[p];
    const int y = eval.base.labels[p];

    std::vector<AdversarialExample> candidates(static_cast<std::size_t>(m_perturbations));
    for (int j = 0; j < m_perturbations; ++j) {
      AttackConfig cfg = setup.attack;
      cfg.seed = setup.attack.seed +
                 static_cast<std::int64_t>(t) * m_perturbations + j;
      candidates[static_cast<std::size_t>(j)] = run_attack(*setup.surrogate, x, y, cfg);
      candidates[static_cast<std::size_t>(j)].sample_index = j;  // candidate id within the trial
    }

    const std::vector<VictimOutcome> outcomes = evaluate_victim(*setup.victim, candidates, 1);
    int trial_all = 0;
    for (const auto& o : outcomes) trial_all += o.transferred ? 1 : 0;
    all_hits[t] = trial_all;
    any_hit[t] = trial_all > 0 ? 1 : 0;

    ExperimentSetup local = setup;
    local.workers = 1;
    for (std::size_t si = 0; si < n_strategies; ++si) {
      const std::uint64_t noise_base =
          setup.noise_seed + (static_cast<std::uint64_t>(t) + 1) * 0x9E37u * static_cast<std::uint64_t>(m_perturbations);
      const std::vector<RankingScore> scores =
          score_examples(candidates, setup.strategies[si], local, noise_base);
      const RankedSet ranked = rank(scores);
      const int top = ranked.order[0];
      per_trial_hits[t][si] = outcomes[static_cast<std::size_t>(top)].transferred ? 1 : 0;
    }

    std::size_t fooled = 0;
    for (const auto& c : candidates) fooled += c.surrogate_fooled ? 1 : 0;
    std::lock_guard<std::mutex> lock(agg_mutex);
    fooled_surrogate += fooled;
  });

  for (std::size_t t = 0; t < static_cast<std::size_t>(n_trials); ++t)
    for (std::size_t si = 0; si < n_strategies; ++si) strategy_hits[si] += per_trial_hits[t][si];

  const double total = static_cast<double>(m_perturbations) * n_trials;
  int all_sum = 0, any_sum = 0;
  for (int v : all_hits) all_sum += v;
  for (int v : any_hit) any_sum += v;

  EvaluationReport report;
  report.experiment = "e2";
  report.lower = static_cast<double>(all_sum) / total;
  report.upper.strategy = "upper_bound";
  report.upper.ks = {1};
  report.upper.values = {static_cast<double>(any_sum) / static_cast<double>(n_trials)};
  for (std::size_t si = 0; si < n_strategies; ++si) {
    TatKCurve curve;
    curve.strategy = strategy_name(setup.strategies[si]);
    curve.ks = {1};
    curve.values = {static_cast<double>(strategy_hits[si]) / static_cast<double>(n_trials)};
    report.strategies.push_back(std::move(curve));
  }

  report.victim_arch = setup.victim_arch;
  report.surrogate_arch = setup.surrogate_arch;
  report.f0_archs = setup.f0.member_arch_names;
  report.test_size = static_cast<int>(setup.test->size());
  report.retained = static_cast<int>(eval.base.size());
  report.retained_fraction = eval.retained_fraction;
  report.surrogate_fooling_rate =
      static_cast<double>(fooled_surrogate) / total;
  report.e2_perturbations = m_perturbations;
  report.e2_trials = n_trials;
  return report;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_results_csv(const std::string& path, const EvaluationReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "experiment,strategy,k,value\n";
  auto emit = [&](const TatKCurve& curve) {
    for (std::size_t i = 0; i < curve.ks.size(); ++i)
      out << report.experiment << ',' << curve.strategy << ',' << curve.ks[i] << ','
          << format_value(curve.values[i]) << '\n';
  };
  for (const auto& curve : report.strategies) emit(curve);
  emit(report.upper);
  for (int k : report.upper.ks)
    out << report.experiment << ",lower_bound," << k << ',' << format_value(report.lower) << '\n';
  if (!out) throw ParseError("write failed: " + path);
}

void write_scores_csv(const std::string& path,
                      const std::vector<std::pair<std::string, RankedSet>>& ranked_by_strategy) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out << "example_index,strategy,score,rank_position\n";
  for (const auto& [name, ranked] : ranked_by_strategy) {
    std::unordered_map<int, int> position;
    position.reserve(ranked.order.size());
    for (std::size_t i = 0; i < ranked.order.size(); ++i)
      position[ranked.order[i]] = static_cast<int>(i);
    for (const auto& s : ranked.scores)
      out << s.example_index << ',' << name << ',' << format_value(s.score) << ','
          << position.at(s.example_index) << '\n';
  }
  if (!out) throw ParseError("write failed: " + path);
}

}  // namespace advrank
