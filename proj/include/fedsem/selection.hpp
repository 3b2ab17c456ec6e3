#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedsem {

enum class Strategy { baseline, utilitarian, proportional_fairness };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);  // baseline | utilitarian | prop_fair

/// One round of the epoch-allocation problem:
///   maximize  sum_k U_k E_k - lambda sum_k n_k x_k
///   s.t.      sum_k E_k = E_total,  x_k <= E_k <= E_max x_k,  x_k binary.
struct SelectionProblem {
  std::vector<double> utilities;
  std::vector<std::int64_t> participation;
  int epoch_budget = 0;
  int max_epochs = 0;
  double fairness_weight = 0.0;

  std::size_t clients() const { return utilities.size(); }

  /// ConfigError for malformed input, InfeasibleError when E_total > K * E_max.
  void validate() const;
};

struct SelectionPlan {
  std::vector<int> epochs;
  std::vector<std::uint8_t> selected;
  double objective = 0.0;

  std::vector<std::size_t> selected_clients() const;
  int total_epochs() const;
};

/// Objective of an epoch vector, summed right to left (client K-1 first).
/// Every solver in this module reports objectives through this fold.
double plan_objective(const SelectionProblem& prob, std::span<const int> epochs);

/// U_k = |D_k| / (L_k + eps).
std::vector<double> compute_utilities(std::span<const std::size_t> dataset_sizes, std::span<const double> losses,
                                      double epsilon = 1e-8);

/// lambda = mean(U) * E_total / (2K).
double default_fairness_weight(std::span<const double> utilities, int epoch_budget);

/// Exact optimum by dynamic programming over (client, remaining budget) in
/// O(K * E_total * E_max). Among optimal plans, returns the lexicographically
/// smallest epoch vector.
SelectionPlan solve_allocation(const SelectionProblem& prob);

/// Equal split: floor(E_total / K) each, the remainder +1 to the lowest ids.
/// Throws InfeasibleError when E_total < K.
SelectionPlan baseline_plan(std::size_t clients, int epoch_budget);

/// Exhaustive enumeration over all (E_max + 1)^K vectors with the same
/// tie-break as solve_allocation. Limited to K <= 6, E_max <= 8.
SelectionPlan brute_force_allocation(const SelectionProblem& prob);

}  // namespace fedsem
