#include "advrank/attacks.hpp"

#include <cmath>
#include <fstream>

#include "advrank/binio.hpp"
#include "advrank/parallel.hpp"
#include "advrank/rng.hpp"

namespace advrank {

namespace {

constexpr char kMagic[4] = {'T', 'A', 'D', 'V'};
constexpr std::uint32_t kFormatVersion = 1;

// Feasibility post-check; a violation is a bug in the attack loop.
void check_example(const AdversarialExample& ex) {
  const float eps = ex.config.epsilon;
  for (Eigen::Index i = 0; i < ex.delta.size(); ++i) {
    const float d = ex.delta.data[i];
    const float x = ex.clean.data[i] + d;
    if (std::fabs(d) > eps + 1e-6f)
      throw InternalError("adversarial example violates the epsilon ball");
    if (x < -1e-6f || x > 1.0f + 1e-6f)
      throw InternalError("adversarial example leaves [0,1]");
  }
}

AdversarialExample finish(const Network& net, const Tensor& x, int y, const AttackConfig& cfg,
                          Tensor delta) {
  AdversarialExample ex;
  ex.clean = x;
  ex.delta = std::move(delta);
  ex.label = y;
  ex.config = cfg;
  ex.surrogate_fooled = argmax(forward(net, ex.adversarial())) != y;
  check_example(ex);
  return ex;
}

// Shared iteration loop. fgsm is the steps=1, step=eps, no-random-start case,
// so the two are bitwise identical by construction.
AdversarialExample iterate_signed(const Network& net, const Tensor& x, int y,
                                  const AttackConfig& cfg, int steps, float step_size,
                                  bool use_momentum) {
  Tensor delta(x.shape, 0.0f);
  if (cfg.random_start) {
    Rng rng(static_cast<std::uint64_t>(cfg.seed));
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
      const float d = static_cast<float>(
          rng.uniform(-static_cast<double>(cfg.epsilon), static_cast<double>(cfg.epsilon)));
      // keep x + delta inside [0,1] from the start
      const float xi = x.data[i];
      delta.data[i] = std::min(1.0f - xi, std::max(-xi, d));
    }
  }

  Tensor accum(x.shape, 0.0f);
  Tensor xadv = x;
  for (int step = 0; step < steps; ++step) {
    xadv.data = x.data + delta.data;
    Tensor grad = grad_input(net, xadv, y);

    const Tensor* direction = &grad;
    if (use_momentum) {
      double l1 = 0.0;
      for (Eigen::Index i = 0; i < grad.size(); ++i)
        l1 += std::fabs(static_cast<double>(grad.data[i]));
      const float scale = l1 < 1e-12 ? 1.0f : static_cast<float>(1.0 / l1);
      accum.data = cfg.mu * accum.data + grad.data * scale;
      direction = &accum;
    }

    for (Eigen::Index i = 0; i < delta.size(); ++i) {
      float d = delta.data[i] + step_size * sign0(direction->data[i]);
      d = std::min(cfg.epsilon, std::max(-cfg.epsilon, d));  // eps-ball projection
      const float xi = x.data[i];
      d = std::min(1.0f - xi, std::max(-xi, d));  // range clipping every step
      delta.data[i] = d;
    }
  }
  return finish(net, x, y, cfg, std::move(delta));
}

}  // namespace

const char* attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::pgd: return "pgd";
    case AttackKind::momentum: return "momentum";
  }
  return "?";
}

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "fgsm") return AttackKind::fgsm;
  if (name == "pgd") return AttackKind::pgd;
  if (name == "momentum") return AttackKind::momentum;
  throw ConfigError("unknown attack kind '" + name + "'");
}

void validate(const AttackConfig& cfg) {
  if (!(cfg.epsilon > 0.0f)) throw ConfigError("attack: epsilon must be > 0");
  if (cfg.steps < 1) throw ConfigError("attack: steps must be positive");
  if (!(cfg.step_size > 0.0f)) throw ConfigError("attack: step_size must be > 0");
  if (cfg.step_size > cfg.epsilon) throw ConfigError("attack: step_size must be <= epsilon");
  if (cfg.mu < 0.0f) throw ConfigError("attack: mu must be >= 0");
  if (cfg.kind == AttackKind::fgsm && (cfg.steps != 1 || cfg.random_start))
    throw ConfigError("attack: fgsm requires steps == 1 and no random start");
}

AdversarialExample fgsm(const Network& net, const Tensor& x, int y, const AttackConfig& cfg) {
  if (cfg.kind != AttackKind::fgsm) throw ConfigError("fgsm called with non-fgsm config");
  validate(cfg);
  return iterate_signed(net, x, y, cfg, 1, cfg.epsilon, false);
}

AdversarialExample pgd(const Network& net, const Tensor& x, int y, const AttackConfig& cfg) {
  if (cfg.kind != AttackKind::pgd) throw ConfigError("pgd called with non-pgd config");
  validate(cfg);
  return iterate_signed(net, x, y, cfg, cfg.steps, cfg.step_size, false);
}

AdversarialExample momentum_pgd(const Network& net, const Tensor& x, int y,
                                const AttackConfig& cfg) {
  if (cfg.kind != AttackKind::momentum)
    throw ConfigError("momentum_pgd called with non-momentum config");
  validate(cfg);
  return iterate_signed(net, x, y, cfg, cfg.steps, cfg.step_size, true);
}

AdversarialExample run_attack(const Network& net, const Tensor& x, int y, const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::fgsm: return fgsm(net, x, y, cfg);
    case AttackKind::pgd: return pgd(net, x, y, cfg);
    case AttackKind::momentum: return momentum_pgd(net, x, y, cfg);
  }
  throw ConfigError("unknown attack kind");
}

std::vector<AdversarialExample> attack_dataset(const Network& net, const EvalSet& eval,
                                               const AttackConfig& cfg, int workers) {
  if (eval.base.size() == 0) throw ConfigError("attack_dataset: empty eval set");
  validate(cfg);

  std::vector<AdversarialExample> out(eval.base.size());
  parallel_for(eval.base.size(), workers, [&](std::size_t i) {
    AttackConfig per_sample = cfg;
    per_sample.seed = cfg.seed + static_cast<std::int64_t>(i);
    out[i] = run_attack(net, eval.base.inputs[i], eval.base.labels[i], per_sample);
    out[i].sample_index = eval.original_indices[i];
  });
  return out;
}

double fooling_rate(const std::vector<AdversarialExample>& examples) {
  if (examples.empty()) return 0.0;
  std::size_t fooled = 0;
  for (const auto& ex : examples)
    if (ex.surrogate_fooled) ++fooled;
  return static_cast<double>(fooled) / static_cast<double>(examples.size());
}

void save_attacks(const std::string& path, const AttackConfig& cfg,
                  const std::vector<AdversarialExample>& examples) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for writing: " + path);

  binio::write_bytes(out, kMagic, 4);
  binio::write_u32(out, kFormatVersion);
  binio::write_u8(out, static_cast<std::uint8_t>(cfg.kind));
  binio::write_f32(out, cfg.epsilon);
  binio::write_u32(out, static_cast<std::uint32_t>(cfg.steps));
  binio::write_f32(out, cfg.step_size);
  binio::write_u8(out, cfg.random_start ? 1 : 0);
  binio::write_f32(out, cfg.mu);
  binio::write_i64(out, cfg.seed);

  for (const auto& ex : examples) {
    binio::write_u32(out, static_cast<std::uint32_t>(ex.sample_index));
    binio::write_u16(out, static_cast<std::uint16_t>(ex.label));
    binio::write_u32(out, static_cast<std::uint32_t>(ex.delta.shape.size()));
    for (int d : ex.delta.shape) binio::write_u32(out, static_cast<std::uint32_t>(d));
    for (Eigen::Index i = 0; i < ex.delta.size(); ++i) binio::write_f32(out, ex.delta.data[i]);
  }
  if (!out) throw ParseError("write failed: " + path);
}

AttackFile load_attacks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);

  char magic[4];
  binio::read_bytes(in, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError("attack file: bad magic in " + path);
  const std::uint32_t version = binio::read_u32(in, "version");
  if (version != kFormatVersion)
    throw VersionError("attack file: unsupported version " + std::to_string(version));

  AttackFile file;
  const std::uint8_t tag = binio::read_u8(in, "attack kind");
  if (tag < 1 || tag > 3) throw ParseError("attack file: unknown attack kind tag");
  file.config.kind = static_cast<AttackKind>(tag);
  file.config.epsilon = binio::read_f32(in, "epsilon");
  file.config.steps = static_cast<int>(binio::read_u32(in, "steps"));
  file.config.step_size = binio::read_f32(in, "step_size");
  file.config.random_start = binio::read_u8(in, "random_start") != 0;
  file.config.mu = binio::read_f32(in, "mu");
  file.config.seed = binio::read_i64(in, "seed");

  while (true) {
    int next = in.peek();
    if (next == std::char_traits<char>::eof()) break;
    AttackRecord rec;
    rec.sample_index = static_cast<int>(binio::read_u32(in, "sample index"));
    rec.label = static_cast<int>(binio::read_u16(in, "label"));
    const std::uint32_t rank = binio::read_u32(in, "delta rank");
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = binio::read_u32(in, "delta dim");
      if (dim == 0) throw ParseError("attack file: zero delta dimension");
      shape.push_back(static_cast<int>(dim));
    }
    Tensor delta(shape);
    for (Eigen::Index i = 0; i < delta.size(); ++i)
      delta.data[i] = binio::read_f32(in, "delta payload");
    rec.delta = std::move(delta);
    file.records.push_back(std::move(rec));
  }
  return file;
}

std::vector<AdversarialExample> resolve_attacks(const AttackFile& file, const Dataset& source,
                                                const Network& surrogate) {
  std::vector<AdversarialExample> out;
  out.reserve(file.records.size());
  for (const auto& rec : file.records) {
    if (rec.sample_index < 0 || static_cast<std::size_t>(rec.sample_index) >= source.size())
      throw ParseError("attack file: sample index out of range of the source dataset");
    AdversarialExample ex;
    ex.sample_index = rec.sample_index;
    ex.clean = source.inputs[static_cast<std::size_t>(rec.sample_index)];
    ex.delta = rec.delta;
    ex.label = rec.label;
    ex.config = file.config;
    if (source.labels[static_cast<std::size_t>(rec.sample_index)] != rec.label)
      throw ParseError("attack file: stored label disagrees with the source dataset");
    check_same_shape(ex.clean, ex.delta, "resolve_attacks");
    ex.surrogate_fooled = argmax(forward(surrogate, ex.adversarial())) != ex.label;
    check_example(ex);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace advrank
