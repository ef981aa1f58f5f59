#pragma once
#include <cstdint>
#include <vector>

#include "advrank/tensor.hpp"

namespace advrank {

// Layer kinds. The numeric values double as the kind tags in the weight file.
enum class LayerKind : std::uint8_t {
  dense = 1,
  conv2d = 2,
  relu = 3,
  flatten = 4,
  avgpool = 5,
};

const char* layer_kind_name(LayerKind kind);

// One layer of a feed-forward stack. Hyperparameters by kind:
//   dense:   {in, out}                                params {W[out,in], b[out]}
//   conv2d:  {in_c, in_h, in_w, out_c, kernel, stride} params {K[out_c,in_c,k,k], b[out_c]}
//   relu:    {}
//   flatten: {d0, d1, ...}  declared input dims; output is [prod(d)]
//   avgpool: {in_c, in_h, in_w, window}               non-overlapping, stride == window
// conv2d uses valid padding only; the kernel must fit inside the input grid.
struct Layer {
  LayerKind kind;
  std::vector<std::uint32_t> hyper;
  std::vector<Tensor> params;
};

int layer_param_count(LayerKind kind);

// Output shape of `layer` applied to an input of shape `in`. A flat input is
// accepted by conv2d/avgpool when its total size matches the declared grid
// (data is row-major either way). Throws ShapeError on any mismatch.
std::vector<int> layer_output_shape(const Layer& layer, const std::vector<int>& in);

Layer make_dense(int in, int out);
Layer make_conv2d(int in_c, int in_h, int in_w, int out_c, int kernel, int stride);
Layer make_relu();
Layer make_flatten(const std::vector<int>& input_shape);
Layer make_avgpool(int in_c, int in_h, int in_w, int window);

// Ordered differentiable layer stack. Immutable after construction for
// inference purposes: forward/grad_input are const and safe to call from many
// threads on the same network. Training mutates parameters and is
// single-threaded per network.
struct Network {
  std::vector<Layer> layers;
  std::vector<int> input_shape;
  int num_classes = 0;
};

// Checks parameter-shape consistency and that composing the layer shapes from
// input_shape ends at [num_classes]. Throws ShapeError/ConfigError.
void validate(const Network& net);

// Logits for input x. Pre: x.shape == net.input_shape, elements in [0,1].
Tensor forward(const Network& net, const Tensor& x);

// Gradient of cross_entropy(forward(net,x), label) with respect to x.
Tensor grad_input(const Network& net, const Tensor& x, int label);

// Per-parameter gradients, mirroring the layer/param structure of the net.
struct ParamGrads {
  std::vector<std::vector<Tensor>> layers;

  void add_scaled(const ParamGrads& other, float scale);
  void scale(float s);
};

ParamGrads zero_grads(const Network& net);
ParamGrads grad_params(const Network& net, const Tensor& x, int label);

// One backward pass producing both input and parameter gradients; cheaper
// than calling grad_input and grad_params separately during training.
struct Gradients {
  Tensor input;
  ParamGrads params;
  double loss = 0.0;
};
Gradients backprop(const Network& net, const Tensor& x, int label);

}  // namespace advrank
