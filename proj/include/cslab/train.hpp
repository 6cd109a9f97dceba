#pragma once

#include <cstdint>
#include <functional>

#include "cslab/data.hpp"
#include "cslab/model.hpp"

namespace cslab {

struct TrainOptions {
  int epochs = 5;
  float learning_rate = 0.05f;
  int batch_size = 32;
  std::uint64_t seed = 1;
  // called once per epoch with (epoch, mean training loss); may be empty
  std::function<void(int, double)> log;
};

/// Plain SGD over shuffled minibatches, deterministic per seed.
/// Throws TrainingFailure (naming the epoch) if the loss goes non-finite.
void train(Model& model, const Dataset& dataset, const TrainOptions& opts);

/// Fraction of samples whose undefended argmax matches the true label.
double accuracy(const Model& model, const Dataset& dataset);

}  // namespace cslab
