#pragma once
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "advrank/attacks.hpp"
#include "advrank/data.hpp"
#include "advrank/ranking.hpp"

namespace advrank {

// Victim verdict for one adversarial example. transferred is the untargeted
// success event: the victim's argmax differs from the ground-truth label.
struct VictimOutcome {
  int example_index = 0;
  bool transferred = false;
  double victim_truth_confidence = 0.0;
};

std::vector<VictimOutcome> evaluate_victim(const Network& victim,
                                           const std::vector<AdversarialExample>& examples,
                                           int workers = 1);

// Fraction of the top-k ranked examples that transferred. The ranked order
// and the outcome list must cover exactly the same example indices;
// 1 <= k <= |outcomes|.
double transferability_at_k(const RankedSet& ranked, const std::vector<VictimOutcome>& outcomes,
                            int k);

// Dataset-average success rate; equals transferability at k = n for any
// ranking, and is the random-selection baseline.
double lower_bound(const std::vector<VictimOutcome>& outcomes);

struct TatKCurve {
  std::string strategy;
  std::vector<int> ks;
  std::vector<double> values;
};

// Oracle curve: orders successes first (ties by ascending victim confidence,
// then index), so the value at k is min(1, successes/k). Dominates every
// strategy curve pointwise.
TatKCurve upper_bound_curve(const std::vector<VictimOutcome>& outcomes,
                            const std::vector<int>& ks);

TatKCurve strategy_curve(const std::string& name, const RankedSet& ranked,
                         const std::vector<VictimOutcome>& outcomes, const std::vector<int>& ks);

// Geometric k grid (1, 2, 4, ...) plus fractional anchors of n and n itself.
std::vector<int> k_grid(int n, const std::vector<double>& anchor_fractions);

struct EvaluationReport {
  std::string experiment;  // "e1" or "e2"
  double lower = 0.0;
  TatKCurve upper;
  std::vector<TatKCurve> strategies;

  std::string victim_arch;
  std::string surrogate_arch;
  std::vector<std::string> f0_archs;
  int test_size = 0;
  int retained = 0;
  double retained_fraction = 0.0;
  double surrogate_fooling_rate = 0.0;
  int e2_perturbations = 0;
  int e2_trials = 0;
};

// Everything a protocol run needs. The victim appears only for correctness
// filtering and outcome evaluation; no ranking strategy ever sees it.
struct ExperimentSetup {
  const Dataset* test = nullptr;
  std::shared_ptr<const Network> surrogate;
  std::string surrogate_arch;
  SurrogateEnsemble f0;
  std::shared_ptr<const Network> victim;
  std::string victim_arch;
  AttackConfig attack;
  std::vector<Strategy> strategies;
  float noise_std = 16.0f / 255.0f;
  int noise_draws = 10;
  std::uint64_t noise_seed = 0;
  int workers = 1;
};

// Sample-ranking experiment: filter the test set by victim correctness,
// attack every retained sample on the surrogate, score with each strategy,
// evaluate the victim once, and report per-strategy curves plus both bounds.
EvaluationReport run_e1(const ExperimentSetup& setup, const std::vector<double>& k_anchors);

// Perturbation-ranking experiment: per trial, pick a victim-correct sample,
// generate m random-start perturbations, let each strategy select its top-1,
// and record the victim verdict of the selection. Bounds are the mean success
// over all m*n perturbations (random selection) and the any-of-m rate.
EvaluationReport run_e2(const ExperimentSetup& setup, int m_perturbations, int n_trials,
                        std::uint64_t seed);

void write_results_csv(const std::string& path, const EvaluationReport& report);

// Score dump for the rank subcommand: example_index, strategy, score,
// rank_position.
void write_scores_csv(const std::string& path,
                      const std::vector<std::pair<std::string, RankedSet>>& ranked_by_strategy);

std::string format_value(double v);

}  // namespace advrank
