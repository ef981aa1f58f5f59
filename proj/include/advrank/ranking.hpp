#pragma once
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "advrank/attacks.hpp"
#include "advrank/net.hpp"

namespace advrank {

enum class Strategy { aet, het, softmax, softmax_noise };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// The auxiliary surrogate set used for scoring transferability. The victim
// network must never be a member; make_ensemble checks both identity and
// architecture name against the victim.
struct SurrogateEnsemble {
  std::vector<std::shared_ptr<const Network>> members;
  std::vector<std::string> member_arch_names;

  std::size_t size() const { return members.size(); }
};

SurrogateEnsemble make_ensemble(std::vector<std::shared_ptr<const Network>> members,
                                std::vector<std::string> arch_names,
                                const Network* victim = nullptr,
                                const std::string& victim_arch = "");

// A transferability score for one example. Higher always means more likely
// to transfer, for every strategy.
struct RankingScore {
  int example_index = 0;
  double score = 0.0;
  Strategy strategy = Strategy::aet;
};

// Fraction of ensemble members fooled by the adversarial input; values lie on
// the grid {0, 1/|F0|, ..., 1}.
RankingScore aet(const AdversarialExample& ex, const SurrogateEnsemble& f0);

// 1 - mean ground-truth softmax confidence across the ensemble on the
// adversarial input; continuous in [0,1].
RankingScore het(const AdversarialExample& ex, const SurrogateEnsemble& f0);

// Single-surrogate baseline on the *clean* sample: 1 - softmax(f'(x))[y].
RankingScore softmax_baseline(const Tensor& clean_x, int y, const Network& surrogate,
                              int example_index);

// Noise-sensitivity statistic for one clean sample: mean positive drop of the
// ground-truth confidence under Gaussian noise clipped to [0,1]. Raw value,
// not yet normalized across the scored set.
RankingScore noise_baseline(const Tensor& clean_x, int y, const Network& surrogate,
                            float noise_std, int n_draws, std::uint64_t seed, int example_index);

// Min-max normalizes scores to [0,1] in place. All-equal scores collapse to 0.
void minmax_normalize(std::vector<RankingScore>& scores);

// Deterministic total order: score descending, ties by ascending example
// index.
struct RankedSet {
  std::vector<RankingScore> scores;  // as given
  std::vector<int> order;            // example indices, best first
};

RankedSet rank(const std::vector<RankingScore>& scores);

}  // namespace advrank
