#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fedsem/data.hpp"
#include "fedsem/federation.hpp"

namespace fedsem {
namespace {

std::vector<Tensor> images(int n, std::uint64_t seed) {
  const auto c = synth_corpus(2, (n + 1) / 2, 3, 16, 16, seed);
  return std::vector<Tensor>(c.images.begin(), c.images.begin() + n);
}

ModelParams scalar_model(double v) {
  ModelParams p;
  p.tensors = {Tensor::from_values({v, 2 * v}), Tensor::from_values({-v})};
  p.offsets = {0, 1, 1, 2, 2};
  return p;
}

TEST(Aggregation, WorkedExample) {
  const std::vector<double> l{1.0, 3.0};
  const auto w0 = aggregation_weights(l, 0.0);
  EXPECT_EQ(w0, (std::vector<double>{0.75, 0.25}));
  const auto w = aggregation_weights(l);
  EXPECT_NEAR(w[0], 0.75, 1e-8);
  EXPECT_NEAR(w[1], 0.25, 1e-8);
}

TEST(Aggregation, EqualLossesGiveEqualWeights) {
  const std::vector<double> l(5, 0.2);
  for (double w : aggregation_weights(l)) EXPECT_NEAR(w, 0.2, 1e-9);
}

TEST(Aggregation, SingleClientAndZeroLosses) {
  const std::vector<double> one{0.7};
  EXPECT_EQ(aggregation_weights(one), (std::vector<double>{1.0}));
  const std::vector<double> zeros(4, 0.0);
  for (double w : aggregation_weights(zeros)) EXPECT_EQ(w, 0.25);
  EXPECT_THROW(aggregation_weights(std::vector<double>{}), ProtocolError);
  EXPECT_THROW(aggregation_weights(std::vector<double>{1.0, -1.0}), UsageError);
}

// sum_k w_k = (|S| - L_tot / (L_tot + eps)) / (|S| - 1), so the excess over 1
// is at most eps / L_tot / (|S| - 1).
TEST(Aggregation, SumAndOrderingOnRandomLosses) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t s = 2 + trial % 9;
    std::vector<double> l(s);
    for (auto& x : l) x = u(rng);
    const auto w = aggregation_weights(l);
    double sum = 0.0;
    for (double x : w) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-6);
    for (std::size_t i = 0; i < s; ++i) {
      EXPECT_GE(w[i], 0.0);
      for (std::size_t j = 0; j < s; ++j) {
        if (l[i] < l[j]) EXPECT_GT(w[i], w[j]);
      }
    }
  }
}

TEST(Aggregation, WeightedSumOfModels) {
  const std::vector<ModelParams> models{scalar_model(1.0), scalar_model(3.0)};
  const std::vector<double> w{0.75, 0.25};
  const auto agg = fed_aggregate(models, w);
  EXPECT_EQ(agg.tensors[0], Tensor::from_values({1.5, 3.0}));
  EXPECT_EQ(agg.tensors[1], Tensor::from_values({-1.5}));
  EXPECT_EQ(agg.offsets, models[0].offsets);
  const std::vector<double> short_w{1.0};
  EXPECT_THROW(fed_aggregate(models, short_w), UsageError);
}

TEST(LocalTrain, KeepsShortFinalBatch) {
  const SemComModel m(SemComConfig::desk_scale());
  std::mt19937_64 rng(1);
  const auto p = m.init_params(rng);
  const auto data = images(40, 3);
  const auto r = local_train(m, p, data, 1, TrainingHyper{}, rng);
  EXPECT_EQ(r.optimizer_steps, 3);
  EXPECT_GT(r.loss, 0.0);
}

TEST(LocalTrain, ZeroLearningRateLeavesModel) {
  const SemComModel m(SemComConfig::desk_scale());
  std::mt19937_64 rng(2);
  const auto p = m.init_params(rng);
  TrainingHyper hyper;
  hyper.adam.learning_rate = 0.0;
  SemComConfig quiet = SemComConfig::desk_scale();
  quiet.noise_enabled = quiet.fading_enabled = false;
  const SemComModel still(quiet);
  const auto data = images(8, 4);
  const auto r = local_train(still, p, data, 2, hyper, rng);
  EXPECT_EQ(r.params, p);
  EXPECT_NEAR(r.loss, evaluate(still, p, data, rng).loss, 1e-12);
}

TEST(LocalTrain, SameStreamSameResult) {
  const SemComModel m(SemComConfig::desk_scale());
  std::mt19937_64 init(3);
  const auto p = m.init_params(init);
  const auto data = images(10, 5);
  std::mt19937_64 a(7), b(7);
  EXPECT_EQ(local_train(m, p, data, 1, TrainingHyper{}, a).params,
            local_train(m, p, data, 1, TrainingHyper{}, b).params);
}

FederationConfig small_config(Strategy s) {
  FederationConfig cfg;
  cfg.strategy = s;
  cfg.rounds = 2;
  cfg.epoch_budget = 3;
  cfg.hyper.batch_size = 4;
  cfg.seed = 5;
  return cfg;
}

FederatedTrainer make_trainer(const SemComModel& m, FederationConfig cfg, std::vector<int> sizes) {
  std::vector<std::vector<Tensor>> data;
  std::uint64_t s = 10;
  for (int n : sizes) data.push_back(images(n, s++));
  std::mt19937_64 rng(1);
  auto initial = m.init_params(rng);
  return FederatedTrainer(m, cfg, std::move(data), images(4, 99), std::move(initial));
}

TEST(Trainer, IdenticalClientsShareWeightEvenly) {
  const SemComModel m(SemComConfig::desk_scale());
  auto cfg = small_config(Strategy::baseline);
  cfg.epoch_budget = 2;
  std::vector<std::vector<Tensor>> data{images(6, 1), images(6, 1)};
  std::mt19937_64 rng(1);
  FederatedTrainer t(m, cfg, data, images(2, 9), m.init_params(rng));
  const auto rec = t.run_round(baseline_plan(2, 2), 1);
  // Private streams differ, so the losses differ slightly; the weights stay close to 1/2.
  EXPECT_NEAR(rec.weights[0], 0.5, 0.05);
  EXPECT_NEAR(rec.weights[0] + rec.weights[1], 1.0, 1e-6);
}

TEST(Trainer, SingleClientFederation) {
  const SemComModel m(SemComConfig::desk_scale());
  auto t = make_trainer(m, small_config(Strategy::utilitarian), {6});
  const auto plan = t.select(1);
  EXPECT_EQ(plan.epochs, (std::vector<int>{3}));
  const auto rec = t.run_round(plan, 1);
  EXPECT_EQ(rec.weights, (std::vector<double>{1.0}));
  EXPECT_EQ(t.clients()[0].participation, 1);
}

TEST(Trainer, UnselectedClientsUntouched) {
  const SemComModel m(SemComConfig::desk_scale());
  auto t = make_trainer(m, small_config(Strategy::utilitarian), {8, 4, 6});
  const auto before = t.clients();
  SelectionPlan plan;
  plan.epochs = {0, 3, 0};
  plan.selected = {0, 1, 0};
  const auto rec = t.run_round(plan, 1);
  EXPECT_EQ(rec.selected, (std::vector<std::size_t>{1}));
  for (std::size_t k : {0u, 2u}) {
    EXPECT_EQ(t.clients()[k].participation, 0);
    EXPECT_EQ(t.clients()[k].last_loss, before[k].last_loss);
    EXPECT_EQ(t.clients()[k].cumulative_steps, 0.0);
  }
  EXPECT_EQ(t.clients()[1].participation, 1);
  EXPECT_EQ(t.clients()[1].cumulative_steps, 4.0 * 3);
  EXPECT_NE(t.clients()[1].last_loss, before[1].last_loss);
}

TEST(Trainer, RejectsBadPlans) {
  const SemComModel m(SemComConfig::desk_scale());
  auto t = make_trainer(m, small_config(Strategy::baseline), {4, 4});
  SelectionPlan empty;
  empty.epochs = {0, 0};
  empty.selected = {0, 0};
  EXPECT_THROW(t.run_round(empty, 1), ProtocolError);
  SelectionPlan wrong_budget;
  wrong_budget.epochs = {1, 1};
  wrong_budget.selected = {1, 1};
  EXPECT_THROW(t.run_round(wrong_budget, 1), ProtocolError);
}

TEST(Trainer, ParticipationLedgerAndGini) {
  const SemComModel m(SemComConfig::desk_scale());
  auto cfg = small_config(Strategy::baseline);
  cfg.epoch_budget = 3;
  auto t = make_trainer(m, cfg, {4, 8, 4});
  const auto recs = t.run();
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& c : t.clients()) EXPECT_EQ(c.participation, 2);
  EXPECT_EQ(recs[1].g_part, 0.0);
  // steps: 4*1, 8*1, 4*1 per round
  EXPECT_EQ(recs[1].cumulative_steps, (std::vector<double>{8, 16, 8}));
  EXPECT_EQ(recs[1].total_steps, 32.0);
  EXPECT_NEAR(recs[1].g_effort, gini(std::vector<double>{8, 16, 8}), 1e-15);
  EXPECT_GT(recs[0].psnr_db, 0.0);
}

TEST(Trainer, ThreadedRunMatchesSequential) {
  const SemComModel m(SemComConfig::desk_scale());
  auto cfg = small_config(Strategy::baseline);
  auto seq = make_trainer(m, cfg, {6, 5, 7});
  cfg.threads = 3;
  auto par = make_trainer(m, cfg, {6, 5, 7});
  const auto a = seq.run();
  const auto b = par.run();
  EXPECT_EQ(seq.global(), par.global());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].losses, b[i].losses);
    EXPECT_EQ(a[i].psnr_db, b[i].psnr_db);
  }
}

TEST(Trainer, StreamsDependOnlyOnSeedClientRound) {
  auto a = FederatedTrainer::client_stream(1, 2, 3);
  auto b = FederatedTrainer::client_stream(1, 2, 3);
  auto c = FederatedTrainer::client_stream(1, 3, 2);
  EXPECT_EQ(a(), b());
  EXPECT_NE(FederatedTrainer::client_stream(1, 2, 3)(), c());
  EXPECT_NE(FederatedTrainer::validation_stream(1, 1)(), FederatedTrainer::validation_stream(1, 2)());
}

}  // namespace
}  // namespace fedsem
