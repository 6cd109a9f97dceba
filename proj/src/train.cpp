#include "cslab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cslab/rng.hpp"

namespace cslab {

void train(Model& model, const Dataset& dataset, const TrainOptions& opts) {
  if (dataset.size() == 0) throw InvalidInputError("train: empty dataset");
  if (dataset.num_classes != model.num_classes)
    throw InvalidInputError("train: dataset classes != model classes");
  if (opts.batch_size < 1) throw InvalidInputError("train: batch_size must be >= 1");

  auto rng = make_rng(opts.seed, 0x747261696eull);
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  Model::Cache cache;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    long seen = 0;
    for (int start = 0; start < dataset.size(); start += opts.batch_size) {
      const int end = std::min(start + opts.batch_size, dataset.size());
      auto grads = model.zero_like_params();
      double batch_loss = 0.0;
      for (int bi = start; bi < end; ++bi) {
        const Tensor x = dataset.sample(order[bi]);
        const int y = dataset.labels[order[bi]];
        Tensor logits = model.forward_cached(x, cache);
        batch_loss += cross_entropy(logits, y);
        model.backward_params(cache, cross_entropy_dlogits(logits, y), grads);
      }
      const int bs = end - start;
      if (!std::isfinite(batch_loss))
        throw TrainingFailure(epoch, "non-finite training loss in epoch " +
                                         std::to_string(epoch));
      const float step = opts.learning_rate / static_cast<float>(bs);
      for (std::size_t li = 0; li < model.params.size(); ++li) {
        auto& p = model.params[li];
        const auto& g = grads[li];
        for (long i = 0; i < p.w.numel(); ++i) p.w.data[i] -= step * g.w.data[i];
        for (long i = 0; i < p.b.numel(); ++i) p.b.data[i] -= step * g.b.data[i];
      }
      epoch_loss += batch_loss;
      seen += bs;
    }
    if (opts.log) opts.log(epoch, epoch_loss / static_cast<double>(seen));
  }
}

double accuracy(const Model& model, const Dataset& dataset) {
  if (dataset.size() == 0) return 0.0;
  int correct = 0;
  for (int i = 0; i < dataset.size(); ++i)
    if (model.forward(dataset.sample(i)).argmax() == dataset.labels[i]) ++correct;
  return static_cast<double>(correct) / dataset.size();
}

}  // namespace cslab
