#include "fedsem/federation.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

namespace fedsem {

LocalResult local_train(const SemComModel& model, const ModelParams& start, std::span<const Tensor> data, int epochs,
                        const TrainingHyper& hyper, std::mt19937_64& rng) {
  if (data.empty()) throw ConfigError("local training needs a nonempty dataset");
  if (epochs < 1) throw ConfigError("local training needs at least one epoch");
  if (hyper.batch_size < 1) throw ConfigError("batch size must be >= 1");

  const double alpha = model.config().loss_alpha;
  LocalResult result{start, 0.0, 0};
  OptimizerState opt(hyper.adam, result.params.tensors);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(hyper.batch_size);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t first = 0; first < order.size(); first += batch) {
      const std::size_t last = std::min(order.size(), first + batch);
      ParamList grads = zeros_like(result.params.tensors);
      for (std::size_t i = first; i < last; ++i) {
        const Tensor& x = data[order[i]];
        const auto rec = model.reconstruct(result.params, x, rng, true);
        epoch_loss += reconstruction_loss(x, rec.image, alpha);
        const auto g = model.backward(result.params, rec.tape, reconstruction_loss_grad(x, rec.image, alpha));
        axpy(1.0, g.tensors, grads);
      }
      scale(grads, 1.0 / static_cast<double>(last - first));
      clip_gradients(grads, hyper.clip_threshold);
      adam_step(opt, result.params.tensors, grads);
      ++result.optimizer_steps;
    }
    result.loss = epoch_loss / static_cast<double>(data.size());
  }
  return result;
}

Evaluation evaluate(const SemComModel& model, const ModelParams& params, std::span<const Tensor> data,
                    std::mt19937_64& rng) {
  if (data.empty()) throw ConfigError("evaluation needs a nonempty dataset");
  Evaluation ev;
  double sq = 0.0;
  Index count = 0;
  for (const auto& x : data) {
    const auto rec = model.reconstruct(params, x, rng, false);
    ev.loss += reconstruction_loss(x, rec.image, model.config().loss_alpha);
    sq += (x.data() - rec.image.data()).squaredNorm();
    count += x.size();
  }
  ev.loss /= static_cast<double>(data.size());
  ev.mse = sq / static_cast<double>(count);
  return ev;
}

std::vector<double> aggregation_weights(std::span<const double> losses, double epsilon) {
  const std::size_t n = losses.size();
  if (n == 0) throw ProtocolError("cannot weight an empty set of clients");
  for (double l : losses) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw UsageError("client losses must be finite and >= 0");
  }
  if (n == 1) return {1.0};
  const double total = std::accumulate(losses.begin(), losses.end(), 0.0);
  if (total == 0.0) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = (1.0 - losses[k] / (total + epsilon)) / static_cast<double>(n - 1);
  }
  return w;
}

ModelParams fed_aggregate(std::span<const ModelParams> models, std::span<const double> weights) {
  if (models.empty()) throw ProtocolError("cannot aggregate zero models");
  if (models.size() != weights.size()) throw UsageError("model and weight counts differ");
  ModelParams out = zeros_like(models.front());
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].offsets != out.offsets || !same_shapes(models[k].tensors, out.tensors)) {
      throw ConfigError("client model " + std::to_string(k) + " has a different parameter layout");
    }
    axpy(weights[k], models[k].tensors, out.tensors);
  }
  return out;
}

FairnessGini participation_and_effort_gini(std::span<const ClientState> clients) {
  std::vector<double> part, steps;
  for (const auto& c : clients) {
    part.push_back(static_cast<double>(c.participation));
    steps.push_back(c.cumulative_steps);
  }
  return participation_and_effort_gini(part, steps);
}

std::mt19937_64 FederatedTrainer::client_stream(std::uint64_t seed, std::size_t k, int t) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xC11E47u,
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(t)};
  return std::mt19937_64(seq);
}

std::mt19937_64 FederatedTrainer::validation_stream(std::uint64_t seed, int t) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7A11Du,
                    static_cast<std::uint32_t>(t)};
  return std::mt19937_64(seq);
}

FederatedTrainer::FederatedTrainer(const SemComModel& model, FederationConfig cfg,
                                   std::vector<std::vector<Tensor>> client_data, std::vector<Tensor> validation,
                                   ModelParams initial)
    : model_(model), cfg_(std::move(cfg)), validation_(std::move(validation)), global_(std::move(initial)) {
  if (client_data.empty()) throw ConfigError("federation needs at least one client");
  if (cfg_.rounds < 1) throw ConfigError("number of rounds must be >= 1");
  if (cfg_.epoch_budget < 1) throw ConfigError("epoch budget must be >= 1");
  if (cfg_.max_epochs == 0) cfg_.max_epochs = cfg_.epoch_budget;
  if (cfg_.max_epochs < 1) throw ConfigError("E_max must be >= 1");
  if (!(cfg_.initial_loss >= 0.0)) throw ConfigError("initial loss must be >= 0");
  if (validation_.empty()) throw ConfigError("federation needs a validation set");
  model_.check_params(global_);
  for (std::size_t k = 0; k < client_data.size(); ++k) {
    if (client_data[k].empty()) throw ConfigError("client " + std::to_string(k) + " has no data");
    ClientState c;
    c.id = k;
    c.data = std::move(client_data[k]);
    c.last_loss = cfg_.initial_loss;
    clients_.push_back(std::move(c));
  }
}

SelectionPlan FederatedTrainer::select(int) const {
  const std::size_t K = clients_.size();
  if (cfg_.strategy == Strategy::baseline) return baseline_plan(K, cfg_.epoch_budget);

  std::vector<std::size_t> sizes;
  std::vector<double> losses;
  SelectionProblem prob;
  for (const auto& c : clients_) {
    sizes.push_back(c.data.size());
    losses.push_back(c.last_loss);
    prob.participation.push_back(c.participation);
  }
  prob.utilities = compute_utilities(sizes, losses, cfg_.utility_epsilon);
  prob.epoch_budget = cfg_.epoch_budget;
  prob.max_epochs = cfg_.max_epochs;
  if (cfg_.strategy == Strategy::proportional_fairness) {
    prob.fairness_weight =
        cfg_.adaptive_lambda ? default_fairness_weight(prob.utilities, cfg_.epoch_budget) : cfg_.fairness_weight;
  }
  auto plan = solve_allocation(prob);
  return plan;
}

RoundRecord FederatedTrainer::run_round(const SelectionPlan& plan, int t) {
  const std::size_t K = clients_.size();
  if (t < 1) throw ProtocolError("rounds are numbered from 1");
  if (plan.epochs.size() != K) throw ProtocolError("plan covers " + std::to_string(plan.epochs.size()) + " clients, expected " + std::to_string(K));
  if (plan.total_epochs() != cfg_.epoch_budget) {
    throw ProtocolError("plan spends " + std::to_string(plan.total_epochs()) + " epochs, budget is " +
                        std::to_string(cfg_.epoch_budget));
  }
  std::vector<std::size_t> selected;
  for (std::size_t k = 0; k < K; ++k) {
    if (plan.epochs[k] < 0 || plan.epochs[k] > cfg_.max_epochs) throw ProtocolError("plan violates the epoch cap");
    if (plan.epochs[k] > 0) selected.push_back(k);
  }
  if (selected.empty()) throw ProtocolError("round " + std::to_string(t) + " selected no clients");

  // Every selected client starts from the same broadcast model.
  const ModelParams broadcast = global_;
  std::vector<LocalResult> results(selected.size());
  auto train_one = [&](std::size_t i) {
    const std::size_t k = selected[i];
    auto rng = client_stream(cfg_.seed, k, t);
    results[i] = local_train(model_, broadcast, clients_[k].data, plan.epochs[k], cfg_.hyper, rng);
  };
  const auto workers = static_cast<std::size_t>(std::max(1, cfg_.threads));
  if (workers == 1 || selected.size() == 1) {
    for (std::size_t i = 0; i < selected.size(); ++i) train_one(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, selected.size()); ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < selected.size(); i += workers) train_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  RoundRecord rec;
  rec.round = t;
  rec.selected = selected;
  rec.epochs = plan.epochs;
  std::vector<ModelParams> models;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    rec.losses.push_back(results[i].loss);
    models.push_back(std::move(results[i].params));
  }
  rec.weights = aggregation_weights(rec.losses, cfg_.aggregation_epsilon);
  for (std::size_t i = 0; i < selected.size(); ++i) rec.avg_client_loss += rec.weights[i] * rec.losses[i];

  for (std::size_t i = 0; i < selected.size(); ++i) {
    auto& c = clients_[selected[i]];
    c.participation += 1;
    c.last_loss = rec.losses[i];
    c.cumulative_steps += static_cast<double>(c.data.size()) * plan.epochs[selected[i]];
  }
  global_ = fed_aggregate(models, rec.weights);

  auto vrng = validation_stream(cfg_.seed, t);
  const auto ev = evaluate(model_, global_, validation_, vrng);
  rec.validation_loss = ev.loss;
  rec.mse = ev.mse;
  rec.psnr_db = psnr(ev.mse);
  const auto g = participation_and_effort_gini(clients_);
  rec.g_part = g.participation;
  rec.g_effort = g.effort;
  for (const auto& c : clients_) {
    rec.cumulative_steps.push_back(c.cumulative_steps);
    rec.total_steps += c.cumulative_steps;
  }
  return rec;
}

std::vector<RoundRecord> FederatedTrainer::run() {
  std::vector<RoundRecord> records;
  for (int t = 1; t <= cfg_.rounds; ++t) {
    const auto plan = select(t);
    double lambda = 0.0;
    if (cfg_.strategy == Strategy::proportional_fairness) {
      std::vector<std::size_t> sizes;
      std::vector<double> losses;
      for (const auto& c : clients_) {
        sizes.push_back(c.data.size());
        losses.push_back(c.last_loss);
      }
      lambda = cfg_.adaptive_lambda
                   ? default_fairness_weight(compute_utilities(sizes, losses, cfg_.utility_epsilon), cfg_.epoch_budget)
                   : cfg_.fairness_weight;
    }
    auto rec = run_round(plan, t);
    rec.fairness_weight = lambda;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace fedsem
