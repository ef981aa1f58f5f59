#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "advrank/data.hpp"
#include "advrank/net.hpp"

namespace advrank {

// Attack kinds. Numeric values double as tags in the attack file format.
enum class AttackKind : std::uint8_t { fgsm = 1, pgd = 2, momentum = 3 };

const char* attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(const std::string& name);

struct AttackConfig {
  AttackKind kind = AttackKind::pgd;
  float epsilon = 0.0f;      // L-inf budget in input units
  int steps = 10;            // pgd/momentum iterations
  float step_size = 0.0f;    // per-step magnitude, <= epsilon
  bool random_start = false; // uniform start in [-eps, eps]
  float mu = 1.0f;           // momentum decay
  std::int64_t seed = 0;
};

void validate(const AttackConfig& cfg);

// Clean sample + perturbation under an L-inf budget. Invariants enforced as
// post-checks on every produced example: max|delta| <= epsilon + 1e-6 and
// clean+delta in [0,1].
struct AdversarialExample {
  int sample_index = 0;  // position in the source dataset
  Tensor clean;
  Tensor delta;
  int label = 0;
  AttackConfig config;
  bool surrogate_fooled = false;

  Tensor adversarial() const {
    Tensor x = clean;
    x.data += delta.data;
    return x;
  }
};

// Single gradient-sign step: delta = clip01(x + eps*sign(grad)) - x.
AdversarialExample fgsm(const Network& net, const Tensor& x, int y, const AttackConfig& cfg);

// Iterated gradient-sign with projection onto the eps-ball and range clipping
// every step; optional uniform random start.
AdversarialExample pgd(const Network& net, const Tensor& x, int y, const AttackConfig& cfg);

// PGD with an L1-normalized gradient accumulator (g <- mu*g + grad/|grad|_1).
AdversarialExample momentum_pgd(const Network& net, const Tensor& x, int y,
                                const AttackConfig& cfg);

AdversarialExample run_attack(const Network& net, const Tensor& x, int y, const AttackConfig& cfg);

// One adversarial example per eval-set sample, order preserving. Per-sample
// seeds are derived as cfg.seed + position, so results are independent of the
// worker count.
std::vector<AdversarialExample> attack_dataset(const Network& net, const EvalSet& eval,
                                               const AttackConfig& cfg, int workers = 1);

double fooling_rate(const std::vector<AdversarialExample>& examples);

// Attack-set persistence (magic "TADV"). Clean inputs are not stored; they
// are resolved from the source dataset by sample index.
struct AttackRecord {
  int sample_index = 0;
  int label = 0;
  Tensor delta;
};

struct AttackFile {
  AttackConfig config;
  std::vector<AttackRecord> records;
};

void save_attacks(const std::string& path, const AttackConfig& cfg,
                  const std::vector<AdversarialExample>& examples);
AttackFile load_attacks(const std::string& path);

// Rebuilds full examples from a loaded file, re-deriving surrogate_fooled.
std::vector<AdversarialExample> resolve_attacks(const AttackFile& file, const Dataset& source,
                                                const Network& surrogate);

}  // namespace advrank
