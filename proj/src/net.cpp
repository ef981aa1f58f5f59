#include "advrank/net.hpp"

#include <Eigen/Dense>
#include <string>

namespace advrank {

namespace {

using RowMatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::int64_t conv_out_side(std::int64_t in, std::int64_t kernel, std::int64_t stride) {
  return (in - kernel) / stride + 1;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

// conv2d/avgpool accept either the declared grid shape or a flat tensor of the
// same total size.
void check_grid_input(const std::vector<int>& in, int c, int h, int w, const char* what) {
  const std::int64_t expect = static_cast<std::int64_t>(c) * h * w;
  if (in.size() == 3 && in[0] == c && in[1] == h && in[2] == w) return;
  if (numel(in) == expect) return;
  throw ShapeError(std::string(what) + ": input " + shape_str(in) + " incompatible with grid [" +
                   std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + "]");
}

}  // namespace

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::avgpool: return "avgpool";
  }
  return "?";
}

int layer_param_count(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense:
    case LayerKind::conv2d: return 2;
    default: return 0;
  }
}

Layer make_dense(int in, int out) {
  if (in <= 0 || out <= 0) throw ConfigError("dense: sizes must be positive");
  Layer l{LayerKind::dense,
          {static_cast<std::uint32_t>(in), static_cast<std::uint32_t>(out)},
          {}};
  l.params.emplace_back(std::vector<int>{out, in});
  l.params.emplace_back(std::vector<int>{out});
  return l;
}

Layer make_conv2d(int in_c, int in_h, int in_w, int out_c, int kernel, int stride) {
  if (in_c <= 0 || in_h <= 0 || in_w <= 0 || out_c <= 0)
    throw ConfigError("conv2d: sizes must be positive");
  if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (kernel < 1 || kernel > in_h || kernel > in_w)
    throw ConfigError("conv2d: kernel " + std::to_string(kernel) + " does not fit input " +
                      std::to_string(in_h) + "x" + std::to_string(in_w));
  Layer l{LayerKind::conv2d,
          {static_cast<std::uint32_t>(in_c), static_cast<std::uint32_t>(in_h),
           static_cast<std::uint32_t>(in_w), static_cast<std::uint32_t>(out_c),
           static_cast<std::uint32_t>(kernel), static_cast<std::uint32_t>(stride)},
          {}};
  l.params.emplace_back(std::vector<int>{out_c, in_c, kernel, kernel});
  l.params.emplace_back(std::vector<int>{out_c});
  return l;
}

Layer make_relu() { return Layer{LayerKind::relu, {}, {}}; }

Layer make_flatten(const std::vector<int>& input_shape) {
  if (input_shape.empty()) throw ConfigError("flatten: empty input shape");
  Layer l{LayerKind::flatten, {}, {}};
  for (int d : input_shape) {
    if (d <= 0) throw ConfigError("flatten: dimensions must be positive");
    l.hyper.push_back(static_cast<std::uint32_t>(d));
  }
  return l;
}

Layer make_avgpool(int in_c, int in_h, int in_w, int window) {
  if (window < 1) throw ConfigError("avgpool: window must be >= 1");
  if (in_h % window != 0 || in_w % window != 0)
    throw ConfigError("avgpool: window must divide the input grid evenly");
  return Layer{LayerKind::avgpool,
               {static_cast<std::uint32_t>(in_c), static_cast<std::uint32_t>(in_h),
                static_cast<std::uint32_t>(in_w), static_cast<std::uint32_t>(window)},
               {}};
}

std::vector<int> layer_output_shape(const Layer& layer, const std::vector<int>& in) {
  switch (layer.kind) {
    case LayerKind::dense: {
      const int din = static_cast<int>(layer.hyper[0]);
      const int dout = static_cast<int>(layer.hyper[1]);
      require(numel(in) == din,
              "dense: input " + shape_str(in) + " has " + std::to_string(numel(in)) +
                  " elements, expected " + std::to_string(din));
      return {dout};
    }
    case LayerKind::conv2d: {
      const int c = static_cast<int>(layer.hyper[0]);
      const int h = static_cast<int>(layer.hyper[1]);
      const int w = static_cast<int>(layer.hyper[2]);
      const int oc = static_cast<int>(layer.hyper[3]);
      const int k = static_cast<int>(layer.hyper[4]);
      const int s = static_cast<int>(layer.hyper[5]);
      check_grid_input(in, c, h, w, "conv2d");
      return {oc, static_cast<int>(conv_out_side(h, k, s)),
              static_cast<int>(conv_out_side(w, k, s))};
    }
    case LayerKind::relu: return in;
    case LayerKind::flatten: {
      std::vector<int> declared(layer.hyper.begin(), layer.hyper.end());
      require(numel(in) == numel(declared), "flatten: input " + shape_str(in) +
                                                " does not match declared " + shape_str(declared));
      return {static_cast<int>(numel(declared))};
    }
    case LayerKind::avgpool: {
      const int c = static_cast<int>(layer.hyper[0]);
      const int h = static_cast<int>(layer.hyper[1]);
      const int w = static_cast<int>(layer.hyper[2]);
      const int win = static_cast<int>(layer.hyper[3]);
      check_grid_input(in, c, h, w, "avgpool");
      return {c, h / win, w / win};
    }
  }
  throw InternalError("unknown layer kind");
}

void validate(const Network& net) {
  if (net.layers.empty()) throw ConfigError("network has no layers");
  if (net.num_classes <= 0) throw ConfigError("network num_classes must be positive");
  std::vector<int> shape = net.input_shape;
  for (const Layer& l : net.layers) {
    if (static_cast<int>(l.params.size()) != layer_param_count(l.kind))
      throw ConfigError(std::string("layer ") + layer_kind_name(l.kind) +
                        ": wrong parameter count");
    if (l.kind == LayerKind::dense) {
      const std::vector<int> wshape{static_cast<int>(l.hyper[1]), static_cast<int>(l.hyper[0])};
      if (l.params[0].shape != wshape || l.params[1].shape != std::vector<int>{wshape[0]})
        throw ShapeError("dense: parameter shapes inconsistent with hyperparameters");
    }
    if (l.kind == LayerKind::conv2d) {
      const std::vector<int> kshape{static_cast<int>(l.hyper[3]), static_cast<int>(l.hyper[0]),
                                    static_cast<int>(l.hyper[4]), static_cast<int>(l.hyper[4])};
      if (l.params[0].shape != kshape || l.params[1].shape != std::vector<int>{kshape[0]})
        throw ShapeError("conv2d: parameter shapes inconsistent with hyperparameters");
    }
    shape = layer_output_shape(l, shape);
  }
  if (shape != std::vector<int>{net.num_classes})
    throw ShapeError("network output shape " + shape_str(shape) + " != [" +
                     std::to_string(net.num_classes) + "]");
}

namespace {

// Forward one layer. Reductions (dense dot products, conv sums, pool means)
// accumulate in double; storage stays float.
Tensor layer_forward(const Layer& l, const Tensor& x) {
  switch (l.kind) {
    case LayerKind::dense: {
      const int din = static_cast<int>(l.hyper[0]);
      const int dout = static_cast<int>(l.hyper[1]);
      Eigen::Map<const RowMatF> W(l.params[0].data.data(), dout, din);
      const Eigen::VectorXd xd = x.data.matrix().cast<double>();
      const Eigen::VectorXd y =
          W.cast<double>() * xd + l.params[1].data.matrix().cast<double>();
      Tensor out(std::vector<int>{dout});
      out.data = y.array().cast<float>();
      return out;
    }
    case LayerKind::conv2d: {
      const int c = static_cast<int>(l.hyper[0]);
      const int h = static_cast<int>(l.hyper[1]);
      const int w = static_cast<int>(l.hyper[2]);
      const int oc = static_cast<int>(l.hyper[3]);
      const int k = static_cast<int>(l.hyper[4]);
      const int s = static_cast<int>(l.hyper[5]);
      const int oh = static_cast<int>(conv_out_side(h, k, s));
      const int ow = static_cast<int>(conv_out_side(w, k, s));
      const float* K = l.params[0].data.data();
      const float* b = l.params[1].data.data();
      const float* in = x.data.data();
      Tensor out(std::vector<int>{oc, oh, ow});
      for (int o = 0; o < oc; ++o)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            double acc = static_cast<double>(b[o]);
            for (int ci = 0; ci < c; ++ci)
              for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v)
                  acc += static_cast<double>(K[((o * c + ci) * k + u) * k + v]) *
                         static_cast<double>(in[(ci * h + i * s + u) * w + j * s + v]);
            out.data[(o * oh + i) * ow + j] = static_cast<float>(acc);
          }
      return out;
    }
    case LayerKind::relu: {
      Tensor out = x;
      out.data = out.data.max(0.0f);
      return out;
    }
    case LayerKind::flatten: {
      Tensor out = x;
      out.shape = {static_cast<int>(x.size())};
      return out;
    }
    case LayerKind::avgpool: {
      const int c = static_cast<int>(l.hyper[0]);
      const int h = static_cast<int>(l.hyper[1]);
      const int w = static_cast<int>(l.hyper[2]);
      const int win = static_cast<int>(l.hyper[3]);
      const int oh = h / win, ow = w / win;
      const float* in = x.data.data();
      Tensor out(std::vector<int>{c, oh, ow});
      const double inv = 1.0 / (static_cast<double>(win) * win);
      for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            double acc = 0.0;
            for (int u = 0; u < win; ++u)
              for (int v = 0; v < win; ++v)
                acc += static_cast<double>(in[(ci * h + i * win + u) * w + j * win + v]);
            out.data[(ci * oh + i) * ow + j] = static_cast<float>(acc * inv);
          }
      return out;
    }
  }
  throw InternalError("unknown layer kind");
}

// Backward one layer: given d(loss)/d(output), produce d(loss)/d(input) and,
// where the layer has parameters, d(loss)/d(params).
Tensor layer_backward(const Layer& l, const Tensor& x, const Tensor& dout,
                      std::vector<Tensor>* dparams) {
  switch (l.kind) {
    case LayerKind::dense: {
      const int din = static_cast<int>(l.hyper[0]);
      const int dout_n = static_cast<int>(l.hyper[1]);
      Eigen::Map<const RowMatF> W(l.params[0].data.data(), dout_n, din);
      const Eigen::VectorXd g = dout.data.matrix().cast<double>();
      Tensor dx(x.shape);
      dx.data = (W.transpose().cast<double>() * g).array().cast<float>();
      if (dparams) {
        Tensor dW(l.params[0].shape);
        Eigen::Map<RowMatF> dWm(dW.data.data(), dout_n, din);
        dWm = (g * x.data.matrix().cast<double>().transpose()).cast<float>();
        Tensor db(l.params[1].shape);
        db.data = dout.data;
        *dparams = {std::move(dW), std::move(db)};
      }
      return dx;
    }
    case LayerKind::conv2d: {
      const int c = static_cast<int>(l.hyper[0]);
      const int h = static_cast<int>(l.hyper[1]);
      const int w = static_cast<int>(l.hyper[2]);
      const int oc = static_cast<int>(l.hyper[3]);
      const int k = static_cast<int>(l.hyper[4]);
      const int s = static_cast<int>(l.hyper[5]);
      const int oh = static_cast<int>(conv_out_side(h, k, s));
      const int ow = static_cast<int>(conv_out_side(w, k, s));
      const float* K = l.params[0].data.data();
      const float* in = x.data.data();
      const float* g = dout.data.data();
      Tensor dx(x.shape);
      std::vector<double> dxa(static_cast<std::size_t>(x.size()), 0.0);
      std::vector<double> dKa(static_cast<std::size_t>(l.params[0].size()), 0.0);
      std::vector<double> dba(static_cast<std::size_t>(oc), 0.0);
      for (int o = 0; o < oc; ++o)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            const double go = static_cast<double>(g[(o * oh + i) * ow + j]);
            dba[static_cast<std::size_t>(o)] += go;
            for (int ci = 0; ci < c; ++ci)
              for (int u = 0; u < k; ++u)
                for (int v = 0; v < k; ++v) {
                  const std::size_t xi =
                      static_cast<std::size_t>((ci * h + i * s + u) * w + j * s + v);
                  const std::size_t ki =
                      static_cast<std::size_t>(((o * c + ci) * k + u) * k + v);
                  dxa[xi] += go * static_cast<double>(K[ki]);
                  dKa[ki] += go * static_cast<double>(in[xi]);
                }
          }
      for (Eigen::Index i = 0; i < dx.size(); ++i)
        dx.data[i] = static_cast<float>(dxa[static_cast<std::size_t>(i)]);
      if (dparams) {
        Tensor dK(l.params[0].shape);
        for (Eigen::Index i = 0; i < dK.size(); ++i)
          dK.data[i] = static_cast<float>(dKa[static_cast<std::size_t>(i)]);
        Tensor db(l.params[1].shape);
        for (int o = 0; o < oc; ++o) db.data[o] = static_cast<float>(dba[static_cast<std::size_t>(o)]);
        *dparams = {std::move(dK), std::move(db)};
      }
      return dx;
    }
    case LayerKind::relu: {
      Tensor dx = dout;
      dx.shape = x.shape;
      for (Eigen::Index i = 0; i < dx.size(); ++i)
        if (x.data[i] <= 0.0f) dx.data[i] = 0.0f;
      return dx;
    }
    case LayerKind::flatten: {
      Tensor dx = dout;
      dx.shape = x.shape;
      return dx;
    }
    case LayerKind::avgpool: {
      const int c = static_cast<int>(l.hyper[0]);
      const int h = static_cast<int>(l.hyper[1]);
      const int w = static_cast<int>(l.hyper[2]);
      const int win = static_cast<int>(l.hyper[3]);
      const int oh = h / win, ow = w / win;
      const float inv = 1.0f / static_cast<float>(win * win);
      const float* g = dout.data.data();
      Tensor dx(x.shape, 0.0f);
      for (int ci = 0; ci < c; ++ci)
        for (int i = 0; i < oh; ++i)
          for (int j = 0; j < ow; ++j) {
            const float go = g[(ci * oh + i) * ow + j] * inv;
            for (int u = 0; u < win; ++u)
              for (int v = 0; v < win; ++v)
                dx.data[(ci * h + i * win + u) * w + j * win + v] = go;
          }
      return dx;
    }
  }
  throw InternalError("unknown layer kind");
}

void check_input(const Network& net, const Tensor& x) {
  if (x.shape != net.input_shape)
    throw ShapeError("network input " + shape_str(x.shape) + " != expected " +
                     shape_str(net.input_shape));
}

}  // namespace

Tensor forward(const Network& net, const Tensor& x) {
  check_input(net, x);
  Tensor cur = x;
  for (const Layer& l : net.layers) {
    const std::vector<int> out_shape = layer_output_shape(l, cur.shape);
    cur = layer_forward(l, cur);
    cur.shape = out_shape;
  }
  if (!cur.all_finite()) throw InternalError("forward produced non-finite logits");
  return cur;
}

void ParamGrads::add_scaled(const ParamGrads& other, float scale) {
  for (std::size_t i = 0; i < layers.size(); ++i)
    for (std::size_t j = 0; j < layers[i].size(); ++j)
      layers[i][j].data += other.layers[i][j].data * scale;
}

void ParamGrads::scale(float s) {
  for (auto& layer : layers)
    for (auto& t : layer) t.data *= s;
}

ParamGrads zero_grads(const Network& net) {
  ParamGrads g;
  g.layers.reserve(net.layers.size());
  for (const Layer& l : net.layers) {
    std::vector<Tensor> zs;
    for (const Tensor& p : l.params) zs.emplace_back(p.shape, 0.0f);
    g.layers.push_back(std::move(zs));
  }
  return g;
}

Gradients backprop(const Network& net, const Tensor& x, int label) {
  check_input(net, x);
  if (label < 0 || label >= net.num_classes)
    throw DomainError("label " + std::to_string(label) + " out of range");

  std::vector<Tensor> acts;
  acts.reserve(net.layers.size() + 1);
  acts.push_back(x);
  for (const Layer& l : net.layers) {
    const std::vector<int> out_shape = layer_output_shape(l, acts.back().shape);
    Tensor out = layer_forward(l, acts.back());
    out.shape = out_shape;
    acts.push_back(std::move(out));
  }

  Gradients result;
  result.loss = cross_entropy(acts.back(), label);

  // d(cross_entropy)/d(logits) = softmax - onehot
  Tensor grad = softmax(acts.back());
  grad.data[label] -= 1.0f;

  result.params.layers.resize(net.layers.size());
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    std::vector<Tensor> dparams;
    const bool wants_params = layer_param_count(net.layers[i].kind) > 0;
    grad = layer_backward(net.layers[i], acts[i], grad, wants_params ? &dparams : nullptr);
    result.params.layers[i] = std::move(dparams);
  }
  grad.shape = x.shape;
  if (!grad.all_finite()) throw InternalError("backprop produced non-finite gradient");
  result.input = std::move(grad);
  return result;
}

Tensor grad_input(const Network& net, const Tensor& x, int label) {
  return backprop(net, x, label).input;
}

ParamGrads grad_params(const Network& net, const Tensor& x, int label) {
  return backprop(net, x, label).params;
}

}  // namespace advrank
