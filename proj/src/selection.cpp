#include "fedsem/selection.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "fedsem/errors.hpp"

namespace fedsem {
namespace {

double choice_value(const SelectionProblem& prob, std::size_t k, int e) {
  const double penalty = e > 0 ? prob.fairness_weight * static_cast<double>(prob.participation[k]) : 0.0;
  return prob.utilities[k] * static_cast<double>(e) - penalty;
}

SelectionPlan make_plan(const SelectionProblem& prob, std::vector<int> epochs) {
  SelectionPlan plan;
  plan.objective = plan_objective(prob, epochs);
  plan.selected.resize(epochs.size());
  for (std::size_t k = 0; k < epochs.size(); ++k) plan.selected[k] = epochs[k] > 0 ? 1 : 0;
  plan.epochs = std::move(epochs);
  return plan;
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::baseline: return "baseline";
    case Strategy::utilitarian: return "utilitarian";
    case Strategy::proportional_fairness: return "prop_fair";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "baseline") return Strategy::baseline;
  if (name == "utilitarian") return Strategy::utilitarian;
  if (name == "prop_fair" || name == "proportional_fairness") return Strategy::proportional_fairness;
  throw ConfigError("unknown strategy '" + name + "' (expected baseline, utilitarian or prop_fair)");
}

void SelectionProblem::validate() const {
  if (utilities.empty()) throw ConfigError("selection problem has no clients");
  if (participation.size() != utilities.size()) throw ConfigError("participation and utility counts differ");
  if (epoch_budget < 0 || max_epochs < 0) throw ConfigError("epoch budget and cap must be >= 0");
  if (!(fairness_weight >= 0.0) || !std::isfinite(fairness_weight)) throw ConfigError("lambda must be finite and >= 0");
  for (double u : utilities) {
    if (!std::isfinite(u) || u < 0.0) throw ConfigError("utilities must be finite and >= 0");
  }
  for (auto n : participation) {
    if (n < 0) throw ConfigError("participation counts must be >= 0");
  }
  if (static_cast<std::int64_t>(epoch_budget) > static_cast<std::int64_t>(clients()) * max_epochs) {
    throw InfeasibleError("epoch budget " + std::to_string(epoch_budget) + " exceeds K * E_max = " +
                          std::to_string(static_cast<std::int64_t>(clients()) * max_epochs));
  }
}

std::vector<std::size_t> SelectionPlan::selected_clients() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    if (selected[k]) out.push_back(k);
  }
  return out;
}

int SelectionPlan::total_epochs() const { return std::accumulate(epochs.begin(), epochs.end(), 0); }

double plan_objective(const SelectionProblem& prob, std::span<const int> epochs) {
  double total = 0.0;
  for (std::size_t k = epochs.size(); k-- > 0;) total = choice_value(prob, k, epochs[k]) + total;
  return total;
}

std::vector<double> compute_utilities(std::span<const std::size_t> dataset_sizes, std::span<const double> losses,
                                      double epsilon) {
  if (dataset_sizes.size() != losses.size()) throw ConfigError("dataset and loss counts differ");
  std::vector<double> u(losses.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = static_cast<double>(dataset_sizes[k]) / (losses[k] + epsilon);
  return u;
}

double default_fairness_weight(std::span<const double> utilities, int epoch_budget) {
  if (utilities.empty()) return 0.0;
  const double mean = std::accumulate(utilities.begin(), utilities.end(), 0.0) / static_cast<double>(utilities.size());
  return mean * static_cast<double>(epoch_budget) / (2.0 * static_cast<double>(utilities.size()));
}

SelectionPlan solve_allocation(const SelectionProblem& prob) {
  prob.validate();
  const std::size_t K = prob.clients();
  const int B = prob.epoch_budget;
  const double kNone = -std::numeric_limits<double>::infinity();
  const auto width = static_cast<std::size_t>(B) + 1;

  // best[k * width + b]: optimal value of clients k..K-1 spending exactly b epochs.
  std::vector<double> best((K + 1) * width, kNone);
  best[K * width + 0] = 0.0;
  for (std::size_t k = K; k-- > 0;) {
    for (int b = 0; b <= B; ++b) {
      double v = kNone;
      for (int e = 0; e <= std::min(prob.max_epochs, b); ++e) {
        const double rest = best[(k + 1) * width + static_cast<std::size_t>(b - e)];
        if (rest == kNone) continue;
        v = std::max(v, choice_value(prob, k, e) + rest);
      }
      best[k * width + static_cast<std::size_t>(b)] = v;
    }
  }

  std::vector<int> epochs(K, 0);
  int remaining = B;
  for (std::size_t k = 0; k < K; ++k) {
    const double target = best[k * width + static_cast<std::size_t>(remaining)];
    for (int e = 0; e <= std::min(prob.max_epochs, remaining); ++e) {
      const double rest = best[(k + 1) * width + static_cast<std::size_t>(remaining - e)];
      if (rest != kNone && choice_value(prob, k, e) + rest == target) {
        epochs[k] = e;
        remaining -= e;
        break;
      }
    }
  }
  return make_plan(prob, std::move(epochs));
}

SelectionPlan baseline_plan(std::size_t clients, int epoch_budget) {
  if (clients < 1) throw ConfigError("baseline plan needs at least one client");
  if (epoch_budget < static_cast<int>(clients)) {
    throw InfeasibleError("baseline needs E_total >= K so that every client trains (E_total = " +
                          std::to_string(epoch_budget) + ", K = " + std::to_string(clients) + ")");
  }
  const int share = epoch_budget / static_cast<int>(clients);
  const int remainder = epoch_budget % static_cast<int>(clients);
  SelectionPlan plan;
  for (std::size_t k = 0; k < clients; ++k) plan.epochs.push_back(share + (static_cast<int>(k) < remainder ? 1 : 0));
  plan.selected.assign(clients, 1);
  return plan;
}

SelectionPlan brute_force_allocation(const SelectionProblem& prob) {
  if (prob.clients() > 6 || prob.max_epochs > 8) {
    throw UsageError("brute force is limited to K <= 6 and E_max <= 8");
  }
  prob.validate();
  const std::size_t K = prob.clients();
  std::vector<int> e(K, 0);
  std::vector<int> best_e;
  double best = -std::numeric_limits<double>::infinity();
  // Odometer over (E_max+1)^K in lexicographic order; keep the first maximum.
  while (true) {
    if (std::accumulate(e.begin(), e.end(), 0) == prob.epoch_budget) {
      const double v = plan_objective(prob, e);
      if (best_e.empty() || v > best) {
        best = v;
        best_e = e;
      }
    }
    std::size_t pos = K;
    while (pos > 0) {
      --pos;
      if (e[pos] < prob.max_epochs) {
        ++e[pos];
        break;
      }
      e[pos] = 0;
      if (pos == 0) return make_plan(prob, std::move(best_e));
    }
    if (K == 0) break;
  }
  return make_plan(prob, std::move(best_e));
}

}  // namespace fedsem
