#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "advrank/net.hpp"
#include "advrank/tensor.hpp"

namespace advrank {

enum class Split { train, test, val };

const char* split_name(Split s);

// Inputs in [0,1], one label per input. Immutable after construction; safe to
// share across threads.
struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  int num_classes = 0;
  Split split_tag = Split::train;

  std::size_t size() const { return inputs.size(); }
};

// Dataset restricted to the indices a designated model classifies correctly.
// original_indices[i] is the position of base.inputs[i] in the source dataset.
struct EvalSet {
  Dataset base;
  std::vector<int> original_indices;
  double retained_fraction = 0.0;
};

// Gaussian class clusters clipped to [0,1]^dim, class-balanced within +-1,
// deterministic per seed. Class centers are drawn inside [0.2, 0.8]^dim with a
// minimum pairwise separation when achievable.
Dataset gen_blobs(int n, int num_classes, int dim, float spread, std::uint64_t seed);

// Two concentric annuli around (0.5, 0.5): class 0 at radius 0.25, class 1 at
// radius 0.40, each with width 0.05. Not linearly separable.
Dataset gen_rings(int n, std::uint64_t seed);

// IDX image/label pair (big-endian headers, u8 pixels scaled to [0,1]).
// limit == 0 keeps all samples; downsample_to == 0 keeps the native size,
// otherwise images are average-pooled to downsample_to x downsample_to.
Dataset load_idx(const std::string& images_path, const std::string& labels_path, int limit,
                 int downsample_to);

// Deterministic shuffled split; the first ceil(test_fraction * n) shuffled
// samples become the test set.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed);

// Keeps exactly the samples where argmax(forward(model, x)) == label,
// preserving order.
EvalSet filter_correct(const Dataset& ds, const Network& model);

double accuracy(const Network& model, const Dataset& ds);

}  // namespace advrank
