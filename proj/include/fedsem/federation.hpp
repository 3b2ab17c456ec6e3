#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fedsem/data.hpp"
#include "fedsem/metrics.hpp"
#include "fedsem/optim.hpp"
#include "fedsem/selection.hpp"
#include "fedsem/semcom.hpp"

namespace fedsem {

struct TrainingHyper {
  AdamConfig adam;
  int batch_size = 16;
  double clip_threshold = 1.0;
};

struct LocalResult {
  ModelParams params;
  double loss = 0.0;  // mean per-sample loss over the final epoch
  std::int64_t optimizer_steps = 0;
};

/// `epochs` passes over `data` in shuffled mini-batches (last short batch
/// kept) with a fresh channel draw per image, gradient clipping and Adam.
/// Every random draw comes from `rng`.
LocalResult local_train(const SemComModel& model, const ModelParams& start, std::span<const Tensor> data, int epochs,
                        const TrainingHyper& hyper, std::mt19937_64& rng);

/// Mean reconstruction loss and MSE of `params` on `data`, one channel draw per image.
struct Evaluation {
  double loss = 0.0;
  double mse = 0.0;
};
Evaluation evaluate(const SemComModel& model, const ModelParams& params, std::span<const Tensor> data,
                    std::mt19937_64& rng);

/// Loss-based weights w_k = (1 - L_k / (L_total + eps)) / (|S| - 1).
/// A single participant gets weight 1; all-zero losses give uniform weights.
std::vector<double> aggregation_weights(std::span<const double> losses, double epsilon = 1e-8);

/// sum_k w_k * theta_k over every tensor of every block.
ModelParams fed_aggregate(std::span<const ModelParams> models, std::span<const double> weights);

struct ClientState {
  std::size_t id = 0;
  std::vector<Tensor> data;
  double last_loss = 1.0;
  std::int64_t participation = 0;
  double cumulative_steps = 0.0;  // sum over rounds of |D_k| * E_k
};

FairnessGini participation_and_effort_gini(std::span<const ClientState> clients);

struct RoundRecord {
  int round = 0;
  std::vector<std::size_t> selected;
  std::vector<int> epochs;               // per client, all K entries
  std::vector<double> losses;            // per selected client, in `selected` order
  std::vector<double> weights;           // per selected client
  double fairness_weight = 0.0;          // lambda used by the selection
  double avg_client_loss = 0.0;          // sum_k w_k L_k
  double validation_loss = 0.0;
  double mse = 0.0;
  double psnr_db = 0.0;
  double g_part = 0.0;
  double g_effort = 0.0;
  std::vector<double> cumulative_steps;  // per client
  double total_steps = 0.0;
};

struct FederationConfig {
  Strategy strategy = Strategy::baseline;
  int rounds = 10;
  int epoch_budget = 12;
  int max_epochs = 0;              // 0 means E_total
  bool adaptive_lambda = true;     // lambda = mean(U) * E_total / (2K) each round
  double fairness_weight = 0.0;    // used for prop_fair when not adaptive
  TrainingHyper hyper;
  double initial_loss = 1.0;
  double utility_epsilon = 1e-8;
  double aggregation_epsilon = 1e-8;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Server side of the protocol: select, broadcast, train, aggregate.
class FederatedTrainer {
 public:
  FederatedTrainer(const SemComModel& model, FederationConfig cfg, std::vector<std::vector<Tensor>> client_data,
                   std::vector<Tensor> validation, ModelParams initial);

  /// Plan for round `t` from the clients' current losses and counts.
  SelectionPlan select(int t) const;

  /// Trains every selected client from the current global model, aggregates
  /// and updates the client ledger. Throws ProtocolError for an empty plan.
  RoundRecord run_round(const SelectionPlan& plan, int t);

  /// Rounds 1..T.
  std::vector<RoundRecord> run();

  const ModelParams& global() const noexcept { return global_; }
  const std::vector<ClientState>& clients() const noexcept { return clients_; }
  const FederationConfig& config() const noexcept { return cfg_; }

  /// Private stream of client k in round t; independent of scheduling.
  static std::mt19937_64 client_stream(std::uint64_t seed, std::size_t k, int t);
  static std::mt19937_64 validation_stream(std::uint64_t seed, int t);

 private:
  const SemComModel& model_;
  FederationConfig cfg_;
  std::vector<ClientState> clients_;
  std::vector<Tensor> validation_;
  ModelParams global_;
};

}  // namespace fedsem
