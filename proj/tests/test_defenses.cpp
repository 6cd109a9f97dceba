#include <doctest.h>

#include <cmath>
#include <random>

#include "cslab/data.hpp"
#include "cslab/defense.hpp"
#include "cslab/rng.hpp"
#include "cslab/train.hpp"

using namespace cslab;

namespace {

Model trained_model() {
  static Model m = [] {
    Dataset ds = synth_blobs(3, 150, 36, 7.0, 101);
    Model model = Model::conv_small(1, 6, 6, 3);
    model.init_random(102);
    TrainOptions opts;
    opts.epochs = 12;
    opts.learning_rate = 0.08f;
    opts.seed = 102;
    train(model, ds, opts);
    return model;
  }();
  return m;
}

Dataset eval_set() { return synth_blobs(3, 100, 36, 7.0, 103); }

Tensor random_image(std::uint64_t seed) {
  Tensor t({1, 6, 6});
  auto rng = make_rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : t.data) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("defense names round trip") {
  for (DefenseKind k : {DefenseKind::None, DefenseKind::Snd, DefenseKind::Rnd,
                        DefenseKind::BitSqueeze, DefenseKind::AvgSmooth,
                        DefenseKind::CounterSample})
    CHECK(defense_kind_from_name(defense_kind_name(k)) == k);
  CHECK_THROWS_AS(defense_kind_from_name("bogus"), InvalidInputError);
}

TEST_CASE("counter-sample: alpha=0 and sigma=0 is the identity") {
  Model m = trained_model();
  const Tensor x = random_image(1);
  DefenseConfig cfg;
  cfg.kind = DefenseKind::CounterSample;
  cfg.alpha = 0.0f;
  cfg.sigma = 0.0f;
  cfg.k = 10;
  auto [out, trace] = counter_sample(m, x, cfg, 5);
  CHECK(out.data == x.data);
  CHECK(trace.steps.size() == 10);
  for (const auto& s : trace.steps) CHECK(s.step_norm == 0.0);
}

TEST_CASE("counter-sample: k=0 only adds the noise") {
  Model m = trained_model();
  const Tensor x = random_image(2);
  DefenseConfig cs, sn;
  cs.kind = DefenseKind::CounterSample;
  cs.k = 0;
  cs.sigma = 0.01f;
  sn.kind = DefenseKind::Snd;
  sn.sigma = 0.01f;
  auto [out, trace] = counter_sample(m, x, cs, 9);
  CHECK(trace.steps.empty());
  CHECK(out.data == snd(x, sn, 9).data);
}

TEST_CASE("counter-sample: alpha=0 equals plain Gaussian noising bit for bit") {
  Model m = trained_model();
  const Tensor x = random_image(3);
  DefenseConfig cs, sn;
  cs.kind = DefenseKind::CounterSample;
  cs.alpha = 0.0f;
  cs.sigma = 0.01f;
  cs.k = 10;
  cs.seed = 77;
  sn.kind = DefenseKind::Snd;
  sn.sigma = 0.01f;
  sn.seed = 77;
  auto [out, trace] = counter_sample(m, x, cs, 13);
  CHECK(out.data == snd(x, sn, 13).data);
}

TEST_CASE("counter-sample: descent reduces the loss toward the predicted class") {
  Model m = trained_model();
  Dataset ds = eval_set();
  DefenseConfig cfg;
  cfg.kind = DefenseKind::CounterSample;
  cfg.k = 10;
  cfg.alpha = 0.1f;
  cfg.sigma = 0.01f;
  int reduced = 0, total = 0;
  for (int i = 0; i < 200 && i < ds.size(); ++i) {
    const Tensor x = ds.sample(i);
    auto [out, trace] = counter_sample(m, x, cfg, 1000 + i);
    REQUIRE(trace.steps.size() == 10);
    const int final_label = softmax(m.forward(out)).argmax();
    const double final_loss = cross_entropy(m.forward(out), trace.steps.back().label);
    ++total;
    if (final_loss < trace.steps.front().loss || final_label == trace.steps.front().label)
      ++reduced;
    (void)final_label;
  }
  // descent toward the running prediction should help on essentially all inputs
  CHECK(reduced >= static_cast<int>(0.99 * total));
}

TEST_CASE("counter-sample: gradient magnitude shrinks substantially") {
  Model m = trained_model();
  Dataset ds = eval_set();
  DefenseConfig cfg;
  cfg.kind = DefenseKind::CounterSample;
  cfg.k = 10;
  cfg.alpha = 0.1f;
  cfg.sigma = 0.01f;
  int shrunk = 0, total = 0;
  for (int i = 0; i < 100; ++i) {
    const Tensor x = ds.sample(i);
    const int y0 = m.forward(x).argmax();
    const double g0 = input_gradient(m, x, y0).l2_norm();
    auto [out, trace] = counter_sample(m, x, cfg, 2000 + i);
    const int y1 = m.forward(out).argmax();
    const double g1 = input_gradient(m, out, y1).l2_norm();
    ++total;
    if (g1 < g0) ++shrunk;
  }
  CHECK(shrunk >= static_cast<int>(0.9 * total));
}

TEST_CASE("counter-sample: output is not clipped to the pixel box") {
  Model m = trained_model();
  DefenseConfig cfg;
  cfg.kind = DefenseKind::CounterSample;
  cfg.k = 10;
  cfg.alpha = 5.0f;  // deliberately huge steps
  cfg.sigma = 0.01f;
  bool escaped = false;
  for (int i = 0; i < 20 && !escaped; ++i) {
    auto [out, trace] = counter_sample(m, random_image(300 + i), cfg, 400 + i);
    for (float v : out.data)
      if (v < 0.0f || v > 1.0f) escaped = true;
  }
  CHECK(escaped);
}

TEST_CASE("counter-sample: trace labels match the model prediction per step") {
  Model m = trained_model();
  const Tensor x = eval_set().sample(0);
  DefenseConfig cfg;
  cfg.kind = DefenseKind::CounterSample;
  cfg.k = 5;
  cfg.alpha = 0.05f;
  cfg.sigma = 0.01f;
  auto [out, trace] = counter_sample(m, x, cfg, 17);
  // replay: the first step's label is the prediction at x + noise
  DefenseConfig sn;
  sn.kind = DefenseKind::Snd;
  sn.sigma = cfg.sigma;
  sn.seed = cfg.seed;
  const Tensor noised = snd(x, sn, 17);
  CHECK(trace.steps.front().label == m.forward(noised).argmax());
  // frozen-label mode keeps that first label throughout
  cfg.freeze_label = true;
  auto [out2, trace2] = counter_sample(m, x, cfg, 17);
  for (const auto& s : trace2.steps) CHECK(s.label == trace2.steps.front().label);
}

TEST_CASE("snd noise has the right mean and variance") {
  DefenseConfig cfg;
  cfg.kind = DefenseKind::Snd;
  cfg.sigma = 0.01f;
  Tensor x({10000});
  std::fill(x.data.begin(), x.data.end(), 0.5f);
  const Tensor y = snd(x, cfg, 31);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const double d = y.data[i] - 0.5;
    sum += d;
    sq += d * d;
  }
  const double mean = sum / 10000.0;
  const double var = sq / 10000.0 - mean * mean;
  // CLT bounds at ~5 sigma for n=10000
  CHECK(std::abs(mean) < 5.0 * 0.01 / 100.0);
  CHECK(var == doctest::Approx(1e-4).epsilon(0.1));
}

TEST_CASE("rnd noise is bounded and has uniform variance") {
  DefenseConfig cfg;
  cfg.kind = DefenseKind::Rnd;
  cfg.eta = 0.02f;
  Tensor x({10000});
  std::fill(x.data.begin(), x.data.end(), 0.5f);
  const Tensor y = rnd(x, cfg, 32);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const double d = y.data[i] - 0.5;
    CHECK(std::abs(d) <= 0.02 + 1e-7);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / 10000.0;
  const double var = sq / 10000.0 - mean * mean;
  CHECK(std::abs(mean) < 5.0 * 0.02 / 100.0);
  // uniform on [-eta, eta] has variance eta^2/3
  CHECK(var == doctest::Approx(0.02 * 0.02 / 3.0).epsilon(0.05));
}

TEST_CASE("noise is fresh per nonce and repeatable within one") {
  DefenseConfig cfg;
  cfg.kind = DefenseKind::Snd;
  cfg.sigma = 0.01f;
  const Tensor x = random_image(41);
  CHECK(snd(x, cfg, 1).data == snd(x, cfg, 1).data);
  CHECK(snd(x, cfg, 1).data != snd(x, cfg, 2).data);
  cfg.kind = DefenseKind::Rnd;
  CHECK(rnd(x, cfg, 1).data == rnd(x, cfg, 1).data);
  CHECK(rnd(x, cfg, 1).data != rnd(x, cfg, 2).data);
}

TEST_CASE("bit squeeze maps to the fixed-point grid and is idempotent") {
  DefenseConfig cfg;
  cfg.kind = DefenseKind::BitSqueeze;
  cfg.bits = 3;
  Tensor x({4}, {0.0f, 1.0f, 0.49f, 0.51f});
  const Tensor y = bit_squeeze(x, cfg);
  const float denom = 7.0f;  // 2^3 - 1
  for (float v : y.data) {
    const float scaled = v * denom;
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-5);
  }
  CHECK(y.data[0] == 0.0f);
  CHECK(y.data[1] == 1.0f);
  CHECK(bit_squeeze(y, cfg).data == y.data);

  cfg.bits = 1;
  const Tensor z = bit_squeeze(x, cfg);
  CHECK(z.data == std::vector<float>{0.0f, 1.0f, 0.0f, 1.0f});

  Tensor bad({1}, {1.5f});
  CHECK_THROWS_AS(bit_squeeze(bad, cfg), InvalidInputError);
}

TEST_CASE("average smoothing: kernel 1 is identity, constants are fixed points") {
  DefenseConfig cfg;
  cfg.kind = DefenseKind::AvgSmooth;
  cfg.kernel = 1;
  const Tensor x = random_image(51);
  CHECK(avg_smooth(x, cfg).data == x.data);
  cfg.kernel = 3;
  Tensor c({1, 6, 6});
  std::fill(c.data.begin(), c.data.end(), 0.25f);
  const Tensor y = avg_smooth(c, cfg);
  for (float v : y.data) CHECK(v == doctest::Approx(0.25f));
}

TEST_CASE("average smoothing: single bright pixel spreads as 1/9 with replicate edges") {
  DefenseConfig cfg;
  cfg.kind = DefenseKind::AvgSmooth;
  cfg.kernel = 3;
  Tensor x({1, 5, 5});
  x.data[2 * 5 + 2] = 1.0f;  // center pixel
  const Tensor y = avg_smooth(x, cfg);
  CHECK(y.data[2 * 5 + 2] == doctest::Approx(1.0f / 9.0f));
  CHECK(y.data[1 * 5 + 1] == doctest::Approx(1.0f / 9.0f));
  CHECK(y.data[0] == 0.0f);
  // corner with replicate padding still averages 9 samples
  Tensor corner({1, 5, 5});
  corner.data[0] = 1.0f;
  const Tensor z = avg_smooth(corner, cfg);
  CHECK(z.data[0] == doctest::Approx(4.0f / 9.0f));  // corner replicated 4x
}

TEST_CASE("defended forward: kind=none is the plain softmax prediction") {
  Model m = trained_model();
  const Tensor x = eval_set().sample(3);
  DefenseConfig cfg;
  cfg.kind = DefenseKind::None;
  const DefendedOutput out = defended_forward(m, x, cfg, 7);
  const Tensor p = softmax(m.forward(x));
  CHECK(out.probs.data == p.data);
  CHECK(out.label == p.argmax());
}

TEST_CASE("defended forward is stateless and nonce-deterministic") {
  Model m = trained_model();
  const Tensor x = eval_set().sample(4);
  for (DefenseKind k : {DefenseKind::Snd, DefenseKind::Rnd, DefenseKind::BitSqueeze,
                        DefenseKind::AvgSmooth, DefenseKind::CounterSample}) {
    DefenseConfig cfg;
    cfg.kind = k;
    cfg.k = 3;
    const DefendedOutput a = defended_forward(m, x, cfg, 11);
    const DefendedOutput b = defended_forward(m, x, cfg, 11);
    CHECK(a.probs.data == b.probs.data);
    CHECK(a.label == b.label);
  }
}

TEST_CASE("defense config validation rejects nonsense") {
  DefenseConfig cfg;
  cfg.kind = DefenseKind::CounterSample;
  cfg.k = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg.k = 10;
  cfg.alpha = -0.5f;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg.alpha = 0.1f;
  cfg.sigma = -1.0f;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg.sigma = 0.01f;
  cfg.validate();
  DefenseConfig sq;
  sq.kind = DefenseKind::BitSqueeze;
  sq.bits = 0;
  CHECK_THROWS_AS(sq.validate(), InvalidInputError);
  DefenseConfig av;
  av.kind = DefenseKind::AvgSmooth;
  av.kernel = 2;  // must be odd
  CHECK_THROWS_AS(av.validate(), InvalidInputError);
}
