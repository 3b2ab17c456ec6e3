// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "fedsem/data.hpp"
#include "fedsem/gradcheck_suite.hpp"
#include "fedsem/harness.hpp"
#include "fedsem/metrics.hpp"
#include "fedsem/selection.hpp"

using namespace fedsem;
namespace fs = std::filesystem;

namespace {

const fs::path kData = FEDSEM_TEST_DATA;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto reports = run_gradcheck_suite(1e-6);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  bool ok = true;
  for (const auto& [name, r] : reports) {
    ok = ok && r.passed();
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = name;
    }
  }
  ok = ok && secs < 60.0;
  return {ok, std::to_string(reports.size()) + " checks, max relative error " + fmt(worst) + " (" + worst_name +
                  "), " + fmt(secs) + " s"};
}

SelectionProblem random_problem(std::mt19937_64& rng, double lambda) {
  std::uniform_int_distribution<int> kd(1, 5), emaxd(1, 6), nd(0, 5);
  std::uniform_real_distribution<double> ud(0.0, 100.0);
  SelectionProblem p;
  const int k = kd(rng);
  p.max_epochs = emaxd(rng);
  std::uniform_int_distribution<int> ed(1, std::min(10, k * p.max_epochs));
  p.epoch_budget = ed(rng);
  for (int i = 0; i < k; ++i) {
    p.utilities.push_back(ud(rng));
    p.participation.push_back(nd(rng));
  }
  p.fairness_weight = lambda;
  return p;
}

Outcome solver_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(500);
  const double lambdas[] = {0.0, 0.5, 5.0, 50.0};
  int mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    const auto p = random_problem(rng, lambdas[i % 4]);
    const auto dp = solve_allocation(p);
    const auto bf = brute_force_allocation(p);
    if (dp.objective != bf.objective || dp.epochs != bf.epochs) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 30.0,
          "500 instances, " + std::to_string(mismatches) + " mismatches, " + fmt(secs) + " s"};
}

Outcome greedy_identity() {
  std::mt19937_64 rng(200);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    auto p = random_problem(rng, 0.0);
    std::vector<std::size_t> order(p.clients());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p.utilities[a] > p.utilities[b]; });
    std::vector<int> greedy(p.clients(), 0);
    int left = p.epoch_budget;
    for (auto k : order) {
      greedy[k] = std::min(left, p.max_epochs);
      left -= greedy[k];
    }
    if (solve_allocation(p).epochs != greedy) ++mismatches;
  }
  return {mismatches == 0, "200 instances, " + std::to_string(mismatches) + " mismatches"};
}

Outcome aggregation() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  double lo = 1.0, hi = 1.0;
  int order_violations = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> l(2 + i % 9);
    for (auto& x : l) x = u(rng);
    const auto w = aggregation_weights(l);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    lo = std::min(lo, sum);
    hi = std::max(hi, sum);
    for (std::size_t a = 0; a < l.size(); ++a) {
      for (std::size_t b = 0; b < l.size(); ++b) {
        if (l[a] < l[b] && !(w[a] > w[b])) ++order_violations;
      }
    }
  }
  const auto ex = aggregation_weights(std::vector<double>{1.0, 3.0});
  const bool in_range = lo >= 1.0 - 1e-6 && hi <= 1.0;
  const bool exact = ex[0] == 0.75 && ex[1] == 0.25;
  std::ostringstream d;
  d << std::setprecision(17) << "sum of weights in [" << lo << ", " << hi << "]" << (in_range ? "" : " (above 1)")
    << ", anti-monotone violations " << order_violations << ", L=(1,3) -> (" << ex[0] << ", " << ex[1] << ")";
  return {in_range && exact && order_violations == 0, d.str()};
}

Outcome channel() {
  SemComConfig cfg = SemComConfig::desk_scale();
  cfg.noise_enabled = false;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto draw = draw_channel(cfg, rng);
    Eigen::VectorXd x(cfg.channel_dim);
    for (Index j = 0; j < x.size(); ++j) x[j] = n(rng);
    worst = std::max(worst, (zf_equalize(apply_channel(x, draw), draw, 0.0) - x).cwiseAbs().maxCoeff());
  }
  cfg = SemComConfig::desk_scale();
  cfg.fading_enabled = false;
  double energy = 0.0;
  long count = 0;
  while (count < 100000) {
    const auto d = draw_channel(cfg, rng);
    for (Index j = 0; j < d.noise.size() && count < 100000; ++j, ++count) energy += std::norm(d.noise[j]);
  }
  const double mean = energy / static_cast<double>(count);
  return {worst <= 1e-9 && mean >= 0.095 && mean <= 0.105,
          "ZF max error " + fmt(worst) + " over 1000 draws, noise energy " + fmt(mean) + " over 1e5 symbols"};
}

Outcome metric_identities() {
  std::vector<double> one_hot(10, 0.0);
  one_hot[0] = 3.0;
  const std::vector<double> ramp{1, 2, 3, 4};
  std::vector<double> scaled = ramp;
  for (auto& x : scaled) x *= 123.456;
  const bool ok = psnr(0.01) == 20.0 && psnr(0.001) == 30.0 && gini(std::vector<double>(5, 2.0)) == 0.0 &&
                  gini(one_hot) == 0.9 && gini(ramp) == 0.25 && std::abs(gini(scaled) - gini(ramp)) <= 1e-12;
  std::ostringstream d;
  d << std::setprecision(17) << "psnr(0.01)=" << psnr(0.01) << " psnr(0.001)=" << psnr(0.001)
    << " gini(one-hot)=" << gini(one_hot) << " gini(1,2,3,4)=" << gini(ramp);
  return {ok, d.str()};
}

ExperimentConfig desk_batch() {
  auto cfg = ExperimentConfig::desk_scale();
  cfg.seeds = {1, 2};
  return cfg;
}

std::string csv_text(const std::vector<CsvRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

Outcome convergence() {
  auto cfg = desk_batch();
  cfg.strategies = {Strategy::baseline};
  const auto t0 = std::chrono::steady_clock::now();
  const auto first = run_experiment(cfg);
  const double secs = seconds_since(t0) / static_cast<double>(cfg.seeds.size());
  const auto again = run_experiment(cfg);
  bool ok = csv_text(first.rows) == csv_text(again.rows) && secs < 600.0;
  std::ostringstream d;
  d << std::fixed << std::setprecision(2);
  for (const auto& run : first.runs) {
    const double gain = run.records.back().psnr_db - run.records.front().psnr_db;
    ok = ok && gain >= 3.0;
    d << "seed " << run.seed << ": " << run.records.front().psnr_db << " -> " << run.records.back().psnr_db
      << " dB (+" << gain << "); ";
  }
  d << secs << " s per seed, repeat identical: " << (csv_text(first.rows) == csv_text(again.rows) ? "yes" : "no");
  return {ok, d.str()};
}

struct BatchResult {
  std::string csv;
  std::vector<CsvRow> rows;
};

BatchResult run_batch(int threads) {
  auto cfg = desk_batch();
  cfg.threads = threads;
  const auto res = run_experiment(cfg);
  return {csv_text(res.rows), res.rows};
}

Outcome trends(const std::vector<CsvRow>& rows) {
  std::map<std::uint64_t, bool> base_zero;
  std::map<std::pair<std::string, std::uint64_t>, const CsvRow*> terminal;
  for (const auto& r : rows) {
    if (r.strategy == "baseline") {
      auto [it, _] = base_zero.try_emplace(r.seed, true);
      it->second = it->second && r.g_part == 0.0;
    }
    auto& slot = terminal[{r.strategy, r.seed}];
    if (!slot || r.round > slot->round) slot = &r;
  }
  int a = 0, b = 0, c = 0;
  std::ostringstream d;
  d << std::setprecision(4);
  for (const auto& [seed, zero] : base_zero) {
    const auto* u = terminal[{"utilitarian", seed}];
    const auto* p = terminal[{"prop_fair", seed}];
    const bool tb = u->g_part >= p->g_part;
    const bool tc = p->rel_efficiency && *p->rel_efficiency >= 1.0;
    a += zero;
    b += tb;
    c += tc;
    d << "seed " << seed << ": (a) " << (zero ? "yes" : "no") << " (b) " << u->g_part << " >= " << p->g_part
      << " (c) pf rel_eff " << (p->rel_efficiency ? *p->rel_efficiency : NAN) << "; ";
  }
  const int n = static_cast<int>(base_zero.size());
  d << "held a " << a << "/" << n << ", b " << b << "/" << n << ", c " << c << "/" << n;
  return {n == 2 && a == 2 && b == 2 && c >= 1, d.str()};
}

Outcome determinism(const BatchResult& sequential) {
  const auto again = run_batch(1);
  const auto threaded = run_batch(4);
  const bool same = again.csv == sequential.csv && threaded.csv == sequential.csv;
  const auto dir = fs::temp_directory_path() / "fedsem_acceptance";
  fs::create_directories(dir);
  std::ofstream(dir / "rounds_sequential.csv", std::ios::binary) << sequential.csv;
  std::ofstream(dir / "rounds_threaded.csv", std::ios::binary) << threaded.csv;
  return {same, std::to_string(sequential.csv.size()) + " bytes; repeat identical: " +
                    (again.csv == sequential.csv ? "yes" : "no") +
                    ", 4 threads identical: " + (threaded.csv == sequential.csv ? "yes" : "no")};
}

Outcome formats() {
  bool ok = true;
  const auto t = load_tensor(kData / "tensor_2x3.fsct");
  const double expect[] = {0.0, 1.0, -2.5, 0.125, 1e-300, 3.0};
  ok = ok && t.shape() == Shape{2, 3} && std::memcmp(t.data().data(), expect, sizeof expect) == 0;
  const auto dir = fs::temp_directory_path() / "fedsem_acceptance";
  fs::create_directories(dir);
  save_tensor(dir / "copy.fsct", t);
  ok = ok && file_bytes(dir / "copy.fsct") == file_bytes(kData / "tensor_2x3.fsct");
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 1e6);
  Tensor r({3, 5, 7});
  for (Index i = 0; i < r.size(); ++i) r[i] = n(rng);
  save_tensor(dir / "random.fsct", r);
  const auto back = load_tensor(dir / "random.fsct");
  ok = ok && back.shape() == r.shape() && std::memcmp(back.data().data(), r.data().data(), 8 * 105) == 0;

  const auto img = load_ppm(kData / "rgb_3x2.ppm");
  const unsigned char px[] = {0, 128, 255, 255, 0, 0, 10, 20, 30, 1, 2, 3, 254, 253, 252, 51, 102, 204};
  ok = ok && img.shape() == Shape{3, 2, 3};
  for (int y = 0; y < 2 && ok; ++y) {
    for (int x = 0; x < 3; ++x) {
      for (int c = 0; c < 3; ++c) ok = ok && img[(c * 2 + y) * 3 + x] == px[(y * 3 + x) * 3 + c] / 255.0;
    }
  }
  save_ppm(dir / "copy.ppm", img);
  ok = ok && load_ppm(dir / "copy.ppm") == img;
  return {ok, "tensor golden load/save and random round trip, PPM golden import and re-export"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << id << "  " << name << ": " << o.detail
              << std::endl;
  };

  report(1, "gradient correctness", gradients);
  report(2, "solver matches brute force", solver_oracle);
  report(3, "zero-lambda solver is greedy", greedy_identity);
  report(4, "aggregation algebra", aggregation);
  report(5, "channel identities", channel);
  report(6, "metric identities", metric_identities);
  report(7, "desk-scale convergence", convergence);
  BatchResult batch;
  report(8, "strategy trends", [&] {
    batch = run_batch(1);
    return trends(batch.rows);
  });
  report(9, "protocol determinism", [&] {
    if (batch.csv.empty()) batch = run_batch(1);
    return determinism(batch);
  });
  report(10, "format round trips", formats);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
