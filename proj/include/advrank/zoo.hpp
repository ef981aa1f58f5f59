#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "advrank/data.hpp"
#include "advrank/net.hpp"

namespace advrank {

// The five desk-scale classifier recipes. All five are pairwise distinct
// recipes; mlp-narrow/mlp-wide differ in hidden width, the rest differ in
// layer kinds or counts.
const std::vector<std::string>& architecture_names();

bool is_known_architecture(const std::string& name);

struct TrainConfig {
  int epochs = 30;
  float learning_rate = 0.1f;
  float momentum = 0.9f;
  int batch_size = 32;
  std::int64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct TrainHistory {
  std::vector<double> epoch_loss;
};

struct ModelBundle {
  std::string arch;
  Network net;
  std::int64_t train_seed = 0;
  float clean_test_accuracy = 0.0f;
};

// Builds the named architecture for the given input shape and class count.
// Weights are uniform with fan-in scaling, deterministic per init_seed.
// CNN recipes need the input to map onto a grid with sides >= 3: either the
// shape is already [c,h,w], or its flat size factors into such a grid.
Network build(const std::string& arch, const std::vector<int>& input_shape, int num_classes,
              std::uint64_t init_seed);

// Mini-batch SGD with momentum on cross-entropy. Fixed seed gives
// bit-identical final weights; the history records mean training loss per
// epoch. Batch gradients are averaged over the batch.
TrainHistory train(Network& net, const Dataset& dataset, const TrainConfig& cfg);

// Weight persistence, versioned binary format (magic "TRNK"). Round trips are
// bit-exact on parameters and metadata.
void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

}  // namespace advrank
