#include "advrank/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "advrank/rng.hpp"

namespace advrank {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::aet: return "aet";
    case Strategy::het: return "het";
    case Strategy::softmax: return "softmax";
    case Strategy::softmax_noise: return "softmax_noise";
  }
  return "?";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "aet") return Strategy::aet;
  if (name == "het") return Strategy::het;
  if (name == "softmax") return Strategy::softmax;
  if (name == "softmax_noise") return Strategy::softmax_noise;
  throw ConfigError("unknown strategy '" + name + "'");
}

SurrogateEnsemble make_ensemble(std::vector<std::shared_ptr<const Network>> members,
                                std::vector<std::string> arch_names, const Network* victim,
                                const std::string& victim_arch) {
  if (members.empty()) throw ConfigError("ensemble must be nonempty");
  if (members.size() != arch_names.size())
    throw ConfigError("ensemble members and architecture names differ in length");
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!members[i]) throw ConfigError("ensemble member is null");
    if (victim && members[i].get() == victim)
      throw ConfigError("the victim network cannot be an ensemble member");
    if (!victim_arch.empty() && arch_names[i] == victim_arch)
      throw ConfigError("the victim architecture '" + victim_arch +
                        "' cannot appear in the ensemble");
  }
  return SurrogateEnsemble{std::move(members), std::move(arch_names)};
}

RankingScore aet(const AdversarialExample& ex, const SurrogateEnsemble& f0) {
  if (f0.size() == 0) throw ConfigError("aet: empty ensemble");
  const Tensor xadv = ex.adversarial();
  int fooled = 0;
  for (const auto& member : f0.members)
    if (argmax(forward(*member, xadv)) != ex.label) ++fooled;
  return RankingScore{ex.sample_index,
                      static_cast<double>(fooled) / static_cast<double>(f0.size()),
                      Strategy::aet};
}

RankingScore het(const AdversarialExample& ex, const SurrogateEnsemble& f0) {
  if (f0.size() == 0) throw ConfigError("het: empty ensemble");
  const Tensor xadv = ex.adversarial();
  double sum_truth_conf = 0.0;
  for (const auto& member : f0.members) {
    const Tensor probs = softmax(forward(*member, xadv));
    sum_truth_conf += static_cast<double>(probs.data[ex.label]);
  }
  return RankingScore{ex.sample_index, 1.0 - sum_truth_conf / static_cast<double>(f0.size()),
                      Strategy::het};
}

RankingScore softmax_baseline(const Tensor& clean_x, int y, const Network& surrogate,
                              int example_index) {
  if (y < 0 || y >= surrogate.num_classes)
    throw DomainError("softmax_baseline: label out of range");
  const Tensor probs = softmax(forward(surrogate, clean_x));
  return RankingScore{example_index, 1.0 - static_cast<double>(probs.data[y]), Strategy::softmax};
}

RankingScore noise_baseline(const Tensor& clean_x, int y, const Network& surrogate,
                            float noise_std, int n_draws, std::uint64_t seed, int example_index) {
  if (y < 0 || y >= surrogate.num_classes) throw DomainError("noise_baseline: label out of range");
  if (n_draws < 1) throw ConfigError("noise_baseline: n_draws must be >= 1");

  const double clean_conf =
      static_cast<double>(softmax(forward(surrogate, clean_x)).data[y]);

  Rng rng(seed);
  double total_drop = 0.0;
  Tensor noised = clean_x;
  for (int k = 0; k < n_draws; ++k) {
    for (Eigen::Index i = 0; i < clean_x.size(); ++i) {
      double v = static_cast<double>(clean_x.data[i]) +
                 rng.gaussian(0.0, static_cast<double>(noise_std));
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      noised.data[i] = static_cast<float>(v);
    }
    const double noised_conf =
        static_cast<double>(softmax(forward(surrogate, noised)).data[y]);
    total_drop += std::max(0.0, clean_conf - noised_conf);
  }
  return RankingScore{example_index, total_drop / static_cast<double>(n_draws),
                      Strategy::softmax_noise};
}

void minmax_normalize(std::vector<RankingScore>& scores) {
  if (scores.empty()) return;
  double lo = scores[0].score, hi = scores[0].score;
  for (const auto& s : scores) {
    lo = std::min(lo, s.score);
    hi = std::max(hi, s.score);
  }
  const double range = hi - lo;
  for (auto& s : scores) s.score = range > 0.0 ? (s.score - lo) / range : 0.0;
}

RankedSet rank(const std::vector<RankingScore>& scores) {
  if (scores.empty()) throw ConfigError("rank: empty score list");
  for (const auto& s : scores) {
    if (s.strategy != scores[0].strategy)
      throw ConfigError("rank: scores mix strategies");
    if (!std::isfinite(s.score)) throw DomainError("rank: non-finite score");
  }

  RankedSet out;
  out.scores = scores;
  out.order.resize(scores.size());
  std::vector<int> positions(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) positions[i] = static_cast<int>(i);
  std::sort(positions.begin(), positions.end(), [&](int a, int b) {
    const auto& sa = scores[static_cast<std::size_t>(a)];
    const auto& sb = scores[static_cast<std::size_t>(b)];
    if (sa.score != sb.score) return sa.score > sb.score;
    return sa.example_index < sb.example_index;
  });
  for (std::size_t i = 0; i < positions.size(); ++i)
    out.order[i] = scores[static_cast<std::size_t>(positions[i])].example_index;
  return out;
}

}  // namespace advrank
