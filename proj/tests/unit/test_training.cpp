#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "glassbox/error.hpp"
#include "glassbox/training.hpp"
#include "test_support.hpp"

using namespace glassbox;

namespace {

// Positive documents contain "good", negative ones "bad", padded with filler.
Dataset keyword_corpus(std::size_t n, std::size_t l, std::uint64_t seed, Vocabulary& vocab) {
  vocab = Vocabulary();
  vocab.add("good");
  vocab.add("bad");
  for (int i = 0; i < 20; ++i) vocab.add("filler" + std::to_string(i));
  Rng rng(seed);
  Dataset ds;
  for (std::size_t d = 0; d < n; ++d) {
    const int label = static_cast<int>(d % 2);
    std::vector<std::string> tokens;
    const std::size_t len = 4 + rng.below(l - 4);
    for (std::size_t t = 0; t < len; ++t) tokens.push_back("filler" + std::to_string(rng.below(20)));
    tokens[rng.below(len)] = label == 1 ? "good" : "bad";
    TokenizedDocument doc;
    doc.ids = encode(tokens, vocab, l);
    doc.tokens = tokens;
    doc.label = label;
    ds.push_back(doc);
  }
  return ds;
}

}  // namespace

TEST_CASE("BCE gradient at eta = 0") {
  auto model = testing::random_model(2, 1, 2, 4, 5, 3);
  for (auto& w : model.classifier.w2) w = 0.0;
  model.classifier.b2 = 0.0;
  Dataset ds;
  TokenizedDocument d;
  d.ids = {2, 3, 0, 0};
  d.label = 1;
  ds.push_back(d);
  TrainConfig cfg;
  cfg.lambda = 0.0;
  const auto lg = loss_and_gradients(model, ds, cfg);
  CHECK(lg.gradients.b2 == -0.5);
  CHECK(lg.loss == doctest::Approx(std::log(2.0)));

  // all-zero placement matrix: L1 term and its subgradient vanish
  cfg.lambda = 5.0;
  cfg.l1_placement = L1Placement::kHiddenToOutput;
  const auto with_l1 = loss_and_gradients(model, ds, cfg);
  CHECK(with_l1.loss == lg.loss);
  CHECK(with_l1.gradients.w2 == lg.gradients.w2);
  CHECK_THROWS_AS(loss_and_gradients(model, Dataset{}, cfg), UsageError);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(1234);
  const auto model = testing::random_model(3, 2, 3, 6, 8, 2024);
  const auto batch = testing::random_dataset(rng, 4, 6, 8);
  for (const auto placement : {L1Placement::kInputToHidden, L1Placement::kHiddenToOutput}) {
    for (const double lambda : {0.0, 0.1}) {
      TrainConfig cfg;
      cfg.lambda = lambda;
      cfg.l1_placement = placement;
      const auto check = testing::check_gradients(model, batch, cfg);
      CAPTURE(lambda);
      CHECK(check.checked >= 90);
      for (const auto& m : check.mismatches) {
        CAPTURE(m.parameter);
        CAPTURE(m.analytic);
        CAPTURE(m.numeric);
        CHECK(false);
      }
    }
  }
}

TEST_CASE("batch_loss agrees with loss_and_gradients") {
  Rng rng(8);
  const auto model = testing::random_model(3, 2, 4, 7, 10, 8);
  const auto batch = testing::random_dataset(rng, 6, 7, 10);
  TrainConfig cfg;
  cfg.lambda = 0.3;
  cfg.l1_placement = L1Placement::kInputToHidden;
  CHECK(batch_loss(model, batch, cfg) == doctest::Approx(loss_and_gradients(model, batch, cfg).loss).epsilon(1e-13));
  CHECK(batch_loss(model, batch, cfg) == doctest::Approx(testing::reference_loss(model, batch, cfg)).epsilon(1e-12));
}

TEST_CASE("fit learns a keyword-separable corpus") {
  Vocabulary vocab;
  const auto train = keyword_corpus(256, 12, 1, vocab);
  const auto val = keyword_corpus(64, 12, 2, vocab);
  ModelConfig mc;
  mc.embed_dim = 8;
  mc.filters_per_size = 4;
  mc.hidden_units = 8;
  mc.max_len = 12;
  mc.seed = 5;
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 20;
  cfg.lambda = 0.0;
  cfg.seed = 5;
  const auto init = init_model(mc, vocab.size());
  const auto result = fit(init, train, val, cfg);
  REQUIRE(result.history.epochs.size() == 20);
  const auto& best = result.history.epochs[result.history.best_epoch];
  CHECK(best.val_accuracy >= 0.95);
  CHECK(result.history.epochs[1].train_loss < result.history.epochs[0].train_loss);
  for (const double v : result.model.embedding.weights.row(0)) CHECK(v == 0.0);

  const auto again = fit(init, train, val, cfg);
  CHECK(again.model.embedding.weights == result.model.embedding.weights);
  CHECK(again.model.classifier == result.model.classifier);
  CHECK(again.model.filters == result.model.filters);

  cfg.epochs = 0;
  CHECK_THROWS_AS(fit(init, train, val, cfg), UsageError);
}

TEST_CASE("a dominating L1 penalty drives W2 to zero") {
  Vocabulary vocab;
  const auto train = keyword_corpus(128, 10, 3, vocab);
  const auto val = keyword_corpus(32, 10, 4, vocab);
  ModelConfig mc;
  mc.embed_dim = 4;
  mc.filters_per_size = 2;
  mc.hidden_units = 4;
  mc.max_len = 10;
  TrainConfig cfg;
  // W2 reaches zero inside the first epoch, so every snapshot is zeroed
  cfg.learning_rate = 0.1;
  cfg.batch_size = 8;
  cfg.epochs = 5;
  cfg.lambda = 1e3;
  cfg.l1_placement = L1Placement::kHiddenToOutput;
  const auto result = fit(init_model(mc, vocab.size()), train, val, cfg);
  double max_abs = 0.0;
  for (const double w : result.model.classifier.w2) max_abs = std::max(max_abs, std::abs(w));
  CHECK(max_abs < 1e-3);
}

TEST_CASE("sweeps and lambda selection") {
  Vocabulary vocab;
  SplitData data;
  data.train = keyword_corpus(64, 8, 5, vocab);
  data.validation = keyword_corpus(16, 8, 6, vocab);
  data.test = keyword_corpus(16, 8, 7, vocab);
  data.vocab_size = vocab.size();
  ModelConfig mc;
  mc.embed_dim = 4;
  mc.filters_per_size = 2;
  mc.hidden_units = 3;
  mc.max_len = 8;
  TrainConfig cfg;
  cfg.epochs = 2;
  const std::vector<std::size_t> nf = {2};
  const std::vector<std::size_t> nh = {3};
  const auto one = sweep_complexity(nf, nh, mc, cfg, data);
  CHECK(one.cells.size() == 1);
  CHECK(sweep_to_csv(one) == sweep_to_csv(sweep_complexity(nf, nh, mc, cfg, data)));

  const std::vector<double> lambdas = {0.5};
  CHECK(sweep_lambda(lambdas, L1Placement::kHiddenToOutput, mc, cfg, data).cells.size() == 1);
  const std::vector<double> unsorted = {0.5, 0.1};
  CHECK_THROWS_AS(sweep_lambda(unsorted, L1Placement::kHiddenToOutput, mc, cfg, data), UsageError);
  CHECK_THROWS_AS(sweep_complexity(std::vector<std::size_t>{}, nh, mc, cfg, data), UsageError);

  SweepResult s;
  s.cells.push_back({0, 0, 0.0, 0.91, 0.0, {}, 600, 600});
  s.cells.push_back({0, 0, 1.0, 0.90, 0.0, {}, 8, 8});
  CHECK(select_lambda(s, 10) == 1.0);
  s.cells[1].region_count = 12;
  CHECK(select_lambda(s, 10) == 1.0);  // fallback: fewest regions
  s.cells.push_back({0, 0, 2.0, 0.90, 0.0, {}, 3, 3});
  s.cells.push_back({0, 0, 3.0, 0.90, 0.0, {}, 4, 4});
  CHECK(select_lambda(s, 10) == 3.0);  // ties go to the larger lambda
}

TEST_CASE("l1 placement names") {
  CHECK(l1_placement_from_string("input_to_hidden") == L1Placement::kInputToHidden);
  CHECK(to_string(L1Placement::kHiddenToOutput) == "hidden_to_output");
  CHECK_THROWS_AS(l1_placement_from_string("both"), UsageError);
}

TEST_CASE("L1 on input-to-hidden weights produces exact zeros") {
  Vocabulary vocab;
  const auto train = keyword_corpus(128, 10, 8, vocab);
  const auto val = keyword_corpus(32, 10, 9, vocab);
  ModelConfig mc;
  mc.embed_dim = 4;
  mc.filters_per_size = 2;
  mc.hidden_units = 4;
  mc.max_len = 10;
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 8;
  cfg.lambda = 1.0;
  cfg.l1_placement = L1Placement::kInputToHidden;
  const auto init = init_model(mc, vocab.size());
  const auto sparse = fit(init, train, val, cfg);
  cfg.lambda = 0.0;
  const auto dense = fit(init, train, val, cfg);
  auto zeros = [](const Matrix& m) { return std::count(m.data.begin(), m.data.end(), 0.0); };
  CHECK(zeros(sparse.model.classifier.w1) > zeros(dense.model.classifier.w1));
  CHECK(zeros(dense.model.classifier.w1) == 0);
}
