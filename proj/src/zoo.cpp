#include "advrank/zoo.hpp"

#include <cmath>
#include <fstream>

#include "advrank/binio.hpp"
#include "advrank/rng.hpp"

namespace advrank {

namespace {

constexpr char kMagic[4] = {'T', 'R', 'N', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

// Picks a [1,h,w] grid for a flat input of size n: square if possible,
// otherwise the most balanced factorization with both sides >= 3.
void flat_to_grid(int n, int* c, int* h, int* w) {
  *c = 1;
  const int root = static_cast<int>(std::lround(std::floor(std::sqrt(static_cast<double>(n)))));
  for (int a = root; a >= 3; --a) {
    if (n % a == 0 && n / a >= 3) {
      *h = a;
      *w = n / a;
      return;
    }
  }
  throw ConfigError("input of size " + std::to_string(n) +
                    " cannot be arranged into a grid with sides >= 3");
}

void input_grid(const std::vector<int>& input_shape, int* c, int* h, int* w) {
  if (input_shape.size() == 3) {
    *c = input_shape[0];
    *h = input_shape[1];
    *w = input_shape[2];
    if (*h >= 3 && *w >= 3) return;
    throw ConfigError("image input " + shape_str(input_shape) + " too small for a 3x3 kernel");
  }
  flat_to_grid(static_cast<int>(numel(input_shape)), c, h, w);
}

void init_params(Network& net, std::uint64_t seed) {
  Rng rng(seed);
  for (Layer& l : net.layers) {
    if (l.params.empty()) continue;
    // fan-in: dense -> input size; conv2d -> in_c * k * k
    double fan_in = 1.0;
    if (l.kind == LayerKind::dense) fan_in = static_cast<double>(l.hyper[0]);
    if (l.kind == LayerKind::conv2d)
      fan_in = static_cast<double>(l.hyper[0]) * l.hyper[4] * l.hyper[4];
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < l.params[0].size(); ++i)
      l.params[0].data[i] = static_cast<float>(rng.uniform(-bound, bound));
    l.params[1].data.setZero();
  }
}

}  // namespace

const std::vector<std::string>& architecture_names() {
  static const std::vector<std::string> names = {"mlp-narrow", "mlp-wide", "mlp-deep",
                                                 "cnn-small", "cnn-pool"};
  return names;
}

bool is_known_architecture(const std::string& name) {
  for (const auto& n : architecture_names())
    if (n == name) return true;
  return false;
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be positive");
  if (!(cfg.learning_rate >= 0.0f)) throw ConfigError("train: learning_rate must be >= 0");
  if (cfg.momentum < 0.0f || cfg.momentum >= 1.0f)
    throw ConfigError("train: momentum must be in [0,1)");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be positive");
}

Network build(const std::string& arch, const std::vector<int>& input_shape, int num_classes,
              std::uint64_t init_seed) {
  if (!is_known_architecture(arch)) throw ConfigError("unknown architecture '" + arch + "'");
  if (num_classes < 2) throw ConfigError("build: need at least 2 classes");
  const int n = static_cast<int>(numel(input_shape));

  Network net;
  net.input_shape = input_shape;
  net.num_classes = num_classes;
  net.layers.push_back(make_flatten(input_shape));

  if (arch == "mlp-narrow") {
    net.layers.push_back(make_dense(n, 32));
    net.layers.push_back(make_relu());
    net.layers.push_back(make_dense(32, num_classes));
  } else if (arch == "mlp-wide") {
    net.layers.push_back(make_dense(n, 128));
    net.layers.push_back(make_relu());
    net.layers.push_back(make_dense(128, num_classes));
  } else if (arch == "mlp-deep") {
    net.layers.push_back(make_dense(n, 48));
    net.layers.push_back(make_relu());
    net.layers.push_back(make_dense(48, 48));
    net.layers.push_back(make_relu());
    net.layers.push_back(make_dense(48, num_classes));
  } else if (arch == "cnn-small") {
    int c, h, w;
    input_grid(input_shape, &c, &h, &w);
    net.layers.push_back(make_conv2d(c, h, w, 8, 3, 1));
    net.layers.push_back(make_relu());
    std::vector<int> conv_out = layer_output_shape(net.layers[1], {c, h, w});
    net.layers.push_back(make_flatten(conv_out));
    net.layers.push_back(make_dense(static_cast<int>(numel(conv_out)), num_classes));
  } else {  // cnn-pool
    int c, h, w;
    input_grid(input_shape, &c, &h, &w);
    net.layers.push_back(make_conv2d(c, h, w, 6, 3, 1));
    net.layers.push_back(make_relu());
    std::vector<int> conv_out = layer_output_shape(net.layers[1], {c, h, w});
    if (conv_out[1] % 2 != 0 || conv_out[2] % 2 != 0)
      throw ConfigError("cnn-pool: conv output " + shape_str(conv_out) +
                        " not divisible by the pool window");
    net.layers.push_back(make_avgpool(conv_out[0], conv_out[1], conv_out[2], 2));
    std::vector<int> pool_out{conv_out[0], conv_out[1] / 2, conv_out[2] / 2};
    net.layers.push_back(make_flatten(pool_out));
    net.layers.push_back(make_dense(static_cast<int>(numel(pool_out)), num_classes));
  }

  init_params(net, init_seed);
  validate(net);
  return net;
}

TrainHistory train(Network& net, const Dataset& dataset, const TrainConfig& cfg) {
  validate(cfg);
  if (dataset.size() == 0) throw ConfigError("train: empty dataset");
  for (int y : dataset.labels)
    if (y < 0 || y >= net.num_classes) throw ConfigError("train: label out of range");

  Rng rng(static_cast<std::uint64_t>(cfg.seed));
  std::vector<int> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  ParamGrads velocity = zero_grads(net);
  TrainHistory history;
  history.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order.data(), order.size(), rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      ParamGrads batch_grad = zero_grads(net);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = static_cast<std::size_t>(order[b]);
        Gradients g = backprop(net, dataset.inputs[i], dataset.labels[i]);
        batch_grad.add_scaled(g.params, 1.0f);
        epoch_loss += g.loss;
      }
      batch_grad.scale(1.0f / static_cast<float>(end - start));

      // v <- mu * v + g;  w <- w - lr * v
      for (std::size_t li = 0; li < net.layers.size(); ++li)
        for (std::size_t pi = 0; pi < net.layers[li].params.size(); ++pi) {
          auto& v = velocity.layers[li][pi].data;
          v = cfg.momentum * v + batch_grad.layers[li][pi].data;
          net.layers[li].params[pi].data -= cfg.learning_rate * v;
        }
    }
    history.epoch_loss.push_back(epoch_loss / static_cast<double>(dataset.size()));
  }
  return history;
}

void save_bundle(const ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open for writing: " + path);

  binio::write_bytes(out, kMagic, 4);
  binio::write_u32(out, kFormatVersion);
  binio::write_u16(out, static_cast<std::uint16_t>(bundle.arch.size()));
  binio::write_bytes(out, bundle.arch.data(), bundle.arch.size());
  binio::write_i64(out, bundle.train_seed);
  binio::write_f32(out, bundle.clean_test_accuracy);
  binio::write_u32(out, static_cast<std::uint32_t>(bundle.net.layers.size()));

  for (const Layer& l : bundle.net.layers) {
    binio::write_u8(out, static_cast<std::uint8_t>(l.kind));
    binio::write_u32(out, static_cast<std::uint32_t>(l.hyper.size()));
    for (std::uint32_t h : l.hyper) binio::write_u32(out, h);
    for (const Tensor& p : l.params) {
      binio::write_u32(out, static_cast<std::uint32_t>(p.shape.size()));
      for (int d : p.shape) binio::write_u32(out, static_cast<std::uint32_t>(d));
      for (Eigen::Index i = 0; i < p.size(); ++i) binio::write_f32(out, p.data[i]);
    }
  }
  if (!out) throw ParseError("write failed: " + path);
}

ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open: " + path);

  char magic[4];
  binio::read_bytes(in, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError("weight file: bad magic in " + path);
  const std::uint32_t version = binio::read_u32(in, "version");
  if (version != kFormatVersion)
    throw VersionError("weight file: unsupported version " + std::to_string(version));

  ModelBundle bundle;
  const std::uint16_t name_len = binio::read_u16(in, "arch name length");
  bundle.arch.resize(name_len);
  binio::read_bytes(in, bundle.arch.data(), name_len, "arch name");
  bundle.train_seed = binio::read_i64(in, "train seed");
  bundle.clean_test_accuracy = binio::read_f32(in, "accuracy");

  const std::uint32_t n_layers = binio::read_u32(in, "layer count");
  for (std::uint32_t li = 0; li < n_layers; ++li) {
    Layer l;
    const std::uint8_t tag = binio::read_u8(in, "layer kind");
    if (tag < 1 || tag > 5) throw ParseError("weight file: unknown layer kind tag");
    l.kind = static_cast<LayerKind>(tag);
    const std::uint32_t n_hyper = binio::read_u32(in, "hyperparameter count");
    for (std::uint32_t i = 0; i < n_hyper; ++i)
      l.hyper.push_back(binio::read_u32(in, "hyperparameter"));
    for (int pi = 0; pi < layer_param_count(l.kind); ++pi) {
      const std::uint32_t rank = binio::read_u32(in, "tensor rank");
      std::vector<int> shape;
      for (std::uint32_t d = 0; d < rank; ++d) {
        const std::uint32_t dim = binio::read_u32(in, "tensor dim");
        if (dim == 0) throw ParseError("weight file: zero tensor dimension");
        shape.push_back(static_cast<int>(dim));
      }
      Tensor t(shape);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = binio::read_f32(in, "tensor payload");
      l.params.push_back(std::move(t));
    }
    bundle.net.layers.push_back(std::move(l));
  }

  if (bundle.net.layers.empty() || bundle.net.layers[0].kind != LayerKind::flatten)
    throw ParseError("weight file: first layer must declare the input shape");
  bundle.net.input_shape.assign(bundle.net.layers[0].hyper.begin(),
                                bundle.net.layers[0].hyper.end());
  const Layer& last = bundle.net.layers.back();
  if (last.kind != LayerKind::dense) throw ParseError("weight file: last layer must be dense");
  bundle.net.num_classes = static_cast<int>(last.hyper[1]);
  validate(bundle.net);
  return bundle;
}

}  // namespace advrank
