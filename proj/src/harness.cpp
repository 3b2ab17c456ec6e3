#include "fedsem/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

namespace fedsem {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& expected, const std::string& value) {
  throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (v.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(out)) bad_value(key, "a number", v);
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (v.empty() || res.ec != std::errc() || res.ptr != end) bad_value(key, "an integer", v);
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const long long x = to_integer(key, v);
  if (x < -(1LL << 30) || x > (1LL << 30)) bad_value(key, "an integer of moderate size", v);
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  bad_value(key, "a boolean (true/false)", v);
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (v.empty() || res.ec != std::errc() || res.ptr != end) bad_value(key, "an unsigned integer seed", v);
  return out;
}

void require(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) throw ConfigError("config key '" + key + "' must satisfy " + constraint);
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"corpus", [](auto& c, auto&, auto& v) { c.corpus = v; }},
      {"synthetic_classes", [](auto& c, auto& k, auto& v) { c.synthetic_classes = to_int(k, v); }},
      {"synthetic_per_class", [](auto& c, auto& k, auto& v) { c.synthetic_per_class = to_int(k, v); }},
      {"validation_size", [](auto& c, auto& k, auto& v) { c.validation_size = to_int(k, v); }},
      {"clients", [](auto& c, auto& k, auto& v) { c.clients = to_int(k, v); }},
      {"alpha_dir", [](auto& c, auto& k, auto& v) { c.alpha_dir = to_double(k, v); }},
      {"rounds", [](auto& c, auto& k, auto& v) { c.rounds = to_int(k, v); }},
      {"epoch_budget", [](auto& c, auto& k, auto& v) { c.epoch_budget = to_int(k, v); }},
      {"max_epochs", [](auto& c, auto& k, auto& v) { c.max_epochs = to_int(k, v); }},
      {"lambda",
       [](auto& c, auto& k, auto& v) {
         if (v == "adaptive") c.lambda.reset();
         else c.lambda = to_double(k, v);
       }},
      {"strategies",
       [](auto& c, auto& k, auto& v) {
         c.strategies.clear();
         for (const auto& s : split(v, ',')) {
           try {
             c.strategies.push_back(parse_strategy(s));
           } catch (const ConfigError&) {
             bad_value(k, "baseline, utilitarian or prop_fair", s);
           }
         }
       }},
      {"image_channels", [](auto& c, auto& k, auto& v) { c.semcom.channels = to_int(k, v); }},
      {"image_height", [](auto& c, auto& k, auto& v) { c.semcom.height = to_int(k, v); }},
      {"image_width", [](auto& c, auto& k, auto& v) { c.semcom.width = to_int(k, v); }},
      {"encoder_channels",
       [](auto& c, auto& k, auto& v) {
         c.semcom.encoder_channels.clear();
         for (const auto& s : split(v, ',')) c.semcom.encoder_channels.push_back(to_int(k, s));
       }},
      {"semantic_dim", [](auto& c, auto& k, auto& v) { c.semcom.semantic_dim = to_int(k, v); }},
      {"channel_dim", [](auto& c, auto& k, auto& v) { c.semcom.channel_dim = to_int(k, v); }},
      {"snr_db", [](auto& c, auto& k, auto& v) { c.semcom.snr_db = to_double(k, v); }},
      {"loss_alpha", [](auto& c, auto& k, auto& v) { c.semcom.loss_alpha = to_double(k, v); }},
      {"zf_epsilon", [](auto& c, auto& k, auto& v) { c.semcom.zf_epsilon = to_double(k, v); }},
      {"channel_noise", [](auto& c, auto& k, auto& v) { c.semcom.noise_enabled = to_bool(k, v); }},
      {"channel_fading", [](auto& c, auto& k, auto& v) { c.semcom.fading_enabled = to_bool(k, v); }},
      {"normalize_power", [](auto& c, auto& k, auto& v) { c.semcom.normalize_power = to_bool(k, v); }},
      {"learning_rate", [](auto& c, auto& k, auto& v) { c.hyper.adam.learning_rate = to_double(k, v); }},
      {"weight_decay", [](auto& c, auto& k, auto& v) { c.hyper.adam.weight_decay = to_double(k, v); }},
      {"batch_size", [](auto& c, auto& k, auto& v) { c.hyper.batch_size = to_int(k, v); }},
      {"clip_threshold", [](auto& c, auto& k, auto& v) { c.hyper.clip_threshold = to_double(k, v); }},
      {"initial_loss", [](auto& c, auto& k, auto& v) { c.initial_loss = to_double(k, v); }},
      {"utility_epsilon", [](auto& c, auto& k, auto& v) { c.utility_epsilon = to_double(k, v); }},
      {"aggregation_epsilon", [](auto& c, auto& k, auto& v) { c.aggregation_epsilon = to_double(k, v); }},
      {"seeds",
       [](auto& c, auto& k, auto& v) {
         c.seeds.clear();
         for (const auto& s : split(v, ',')) c.seeds.push_back(to_seed(k, s));
       }},
      {"threads", [](auto& c, auto& k, auto& v) { c.threads = to_int(k, v); }},
      {"output_dir", [](auto& c, auto&, auto& v) { c.output_dir = v; }},
      {"normalize_efficiency",
       [](auto& c, auto& k, auto& v) {
         if (v == "auto") c.normalize_efficiency = Normalization::automatic;
         else if (v == "on") c.normalize_efficiency = Normalization::on;
         else if (v == "off") c.normalize_efficiency = Normalization::off;
         else bad_value(k, "auto, on or off", v);
       }},
  };
  return table;
}

ExperimentConfig preset_by_name(const std::string& name) {
  if (name == "desk-scale") return ExperimentConfig::desk_scale();
  if (name == "paper-scale") return ExperimentConfig::paper_scale();
  throw ConfigError("config key 'preset': unknown preset '" + name + "' (expected desk-scale or paper-scale)");
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ";" : "") << v[i];
  return os.str();
}

std::string csv_field(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

ExperimentConfig ExperimentConfig::desk_scale() {
  ExperimentConfig c;
  c.preset = "desk-scale";
  return c;
}

ExperimentConfig ExperimentConfig::paper_scale() {
  ExperimentConfig c;
  c.preset = "paper-scale";
  c.synthetic_classes = 20;
  c.synthetic_per_class = 500;
  c.validation_size = 1000;
  c.clients = 10;
  c.alpha_dir = 1.0;
  c.rounds = 50;
  c.epoch_budget = 30;
  c.semcom = SemComConfig::paper_scale();
  c.hyper.adam.learning_rate = 3e-4;
  c.hyper.adam.weight_decay = 1e-4;
  c.hyper.batch_size = 16;
  c.hyper.clip_threshold = 1.0;
  c.seeds = {1, 2, 3};
  return c;
}

void ExperimentConfig::validate() const {
  require(corpus == "synthetic" || !corpus.empty(), "corpus", "'synthetic' or a path");
  require(synthetic_classes >= 1, "synthetic_classes", ">= 1");
  require(synthetic_per_class >= 1, "synthetic_per_class", ">= 1");
  require(validation_size >= 1, "validation_size", ">= 1");
  require(clients >= 1, "clients", ">= 1");
  require(alpha_dir > 0.0, "alpha_dir", "> 0");
  require(rounds >= 1, "rounds", ">= 1");
  require(epoch_budget >= 1, "epoch_budget", ">= 1");
  require(max_epochs >= 0, "max_epochs", ">= 0 (0 means epoch_budget)");
  const int cap = max_epochs == 0 ? epoch_budget : max_epochs;
  require(static_cast<long long>(clients) * cap >= epoch_budget, "max_epochs", "clients * max_epochs >= epoch_budget");
  require(!lambda || *lambda >= 0.0, "lambda", ">= 0 or 'adaptive'");
  require(!strategies.empty(), "strategies", "at least one strategy");
  for (auto s : strategies) {
    if (s == Strategy::baseline) require(epoch_budget >= clients, "epoch_budget", ">= clients for the baseline strategy");
  }
  require(semcom.channels >= 1 && semcom.height >= 1 && semcom.width >= 1, "image_channels/image_height/image_width", ">= 1");
  require(semcom.channel_dim >= 2 && semcom.channel_dim % 2 == 0, "channel_dim", "an even number >= 2");
  require(semcom.channel_dim < semcom.semantic_dim, "channel_dim", "channel_dim < semantic_dim");
  require(semcom.semantic_dim < semcom.image_size(), "semantic_dim", "semantic_dim < C*H*W");
  require(semcom.loss_alpha >= 0.0 && semcom.loss_alpha <= 1.0, "loss_alpha", "0 <= loss_alpha <= 1");
  require(semcom.zf_epsilon >= 0.0, "zf_epsilon", ">= 0");
  require(hyper.adam.learning_rate >= 0.0, "learning_rate", ">= 0");
  require(hyper.adam.weight_decay >= 0.0, "weight_decay", ">= 0");
  require(hyper.batch_size >= 1, "batch_size", ">= 1");
  require(hyper.clip_threshold > 0.0, "clip_threshold", "> 0");
  require(initial_loss >= 0.0, "initial_loss", ">= 0");
  require(utility_epsilon > 0.0, "utility_epsilon", "> 0");
  require(aggregation_epsilon >= 0.0, "aggregation_epsilon", ">= 0");
  require(!seeds.empty(), "seeds", "at least one seed");
  require(threads >= 1, "threads", ">= 1");
  semcom.validate();
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::optional<std::string> preset;
  std::set<std::string> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
    if (key == "preset") {
      preset = value;
      continue;
    }
    if (!setters().contains(key)) throw ConfigError("config key '" + key + "' is not recognized");
    entries.emplace_back(std::move(key), std::move(value));
  }
  ExperimentConfig cfg = preset ? preset_by_name(*preset) : ExperimentConfig::desk_scale();
  if (!preset) cfg.preset.clear();
  for (const auto& [k, v] : entries) setters().at(k)(cfg, k, v);
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (!setters().contains(key)) throw ConfigError("config key '" + key + "' is not recognized");
  setters().at(key)(cfg, key, trim(value));
  cfg.validate();
}

void apply_seed_override(ExperimentConfig& cfg) {
  if (const char* env = std::getenv("FEDSEM_SEED"); env && *env) {
    cfg.seeds = {to_seed("FEDSEM_SEED", trim(env))};
  }
}

SeedSetup prepare_seed(const ExperimentConfig& cfg, const SemComModel& model, std::uint64_t seed) {
  auto stream = [seed](std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
    return std::mt19937_64(seq);
  };
  Corpus corpus = cfg.corpus == "synthetic"
                      ? synth_corpus(cfg.synthetic_classes, cfg.synthetic_per_class, cfg.semcom.channels,
                                     cfg.semcom.height, cfg.semcom.width, seed)
                      : load_corpus(cfg.corpus);
  if (corpus.image_shape() != Shape{cfg.semcom.channels, cfg.semcom.height, cfg.semcom.width}) {
    throw ConfigError("corpus images are " + shape_string(corpus.image_shape()) +
                      ", config expects image_channels x image_height x image_width");
  }
  auto split_rng = stream(0x5B117u);
  auto [train, validation] = split_validation(corpus, static_cast<std::size_t>(cfg.validation_size), split_rng);
  auto part_rng = stream(0xD1C7u);
  SeedSetup setup;
  setup.partition = dirichlet_partition(train, static_cast<std::size_t>(cfg.clients), cfg.alpha_dir, part_rng);
  for (const auto& idx : setup.partition.clients) setup.client_data.push_back(train.select(idx).images);
  setup.validation = std::move(validation.images);
  auto init_rng = stream(0x1417u);
  setup.initial = model.init_params(init_rng);
  return setup;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const SemComModel model(cfg.semcom);
  ExperimentResult result;
  for (std::uint64_t seed : cfg.seeds) {
    const SeedSetup setup = prepare_seed(cfg, model, seed);
    for (Strategy s : cfg.strategies) {
      FederationConfig fc;
      fc.strategy = s;
      fc.rounds = cfg.rounds;
      fc.epoch_budget = cfg.epoch_budget;
      fc.max_epochs = cfg.max_epochs;
      fc.adaptive_lambda = !cfg.lambda.has_value();
      fc.fairness_weight = cfg.lambda.value_or(0.0);
      fc.hyper = cfg.hyper;
      fc.initial_loss = cfg.initial_loss;
      fc.utility_epsilon = cfg.utility_epsilon;
      fc.aggregation_epsilon = cfg.aggregation_epsilon;
      fc.seed = seed;
      fc.threads = cfg.threads;
      FederatedTrainer trainer(model, fc, setup.client_data, setup.validation, setup.initial);
      result.runs.push_back({s, seed, trainer.run()});
    }
  }
  result.rows = to_rows(result.runs);
  normalize_efficiency(result.rows, cfg.normalize_efficiency);
  return result;
}

std::vector<CsvRow> to_rows(const std::vector<RunResult>& runs) {
  std::vector<CsvRow> rows;
  for (const auto& run : runs) {
    for (const auto& r : run.records) {
      CsvRow row;
      row.round = r.round;
      row.strategy = to_string(run.strategy);
      row.seed = run.seed;
      row.psnr_db = r.psnr_db;
      row.mse = r.mse;
      row.avg_client_loss = r.avg_client_loss;
      row.g_part = r.g_part;
      row.g_effort = r.g_effort;
      row.total_steps = r.total_steps;
      row.selected = r.selected;
      row.epochs = r.epochs;
      row.efficiency = efficiency(r.psnr_db, r.total_steps);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void normalize_efficiency(std::vector<CsvRow>& rows, Normalization mode) {
  for (auto& r : rows) r.rel_efficiency.reset();
  if (mode == Normalization::off) return;
  std::map<std::pair<std::uint64_t, int>, double> baseline;
  for (const auto& r : rows) {
    if (r.strategy == "baseline") baseline[{r.seed, r.round}] = r.efficiency;
  }
  if (baseline.empty()) {
    if (mode == Normalization::on) {
      throw ConfigError("config key 'normalize_efficiency' is on but no baseline run is in the batch");
    }
    return;
  }
  for (auto& r : rows) {
    const auto it = baseline.find({r.seed, r.round});
    if (it == baseline.end()) {
      throw ConfigError("no baseline row for seed " + std::to_string(r.seed) + ", round " + std::to_string(r.round));
    }
    r.rel_efficiency = r.efficiency / it->second;
  }
}

void write_csv(std::ostream& os, const std::vector<CsvRow>& rows) {
  os << kCsvVersionLine << '\n' << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.round << ',' << r.strategy << ',' << r.seed << ',' << format_double(r.psnr_db) << ','
       << format_double(r.mse) << ',' << format_double(r.avg_client_loss) << ',' << format_double(r.g_part) << ','
       << format_double(r.g_effort) << ',' << format_double(r.total_steps) << ',' << join(r.selected) << ','
       << join(r.epochs) << ',' << format_double(r.efficiency) << ',' << csv_field(r.rel_efficiency) << '\n';
  }
}

std::vector<CsvRow> read_csv(std::istream& is) {
  std::string line;
  std::uint64_t offset = 0;
  auto next = [&](std::string& out) {
    if (!std::getline(is, out)) return false;
    offset += out.size() + 1;
    return true;
  };
  if (!next(line) || line != kCsvVersionLine) throw FormatError("missing CSV version line", 0);
  if (!next(line) || line != kCsvHeader) throw FormatError("unexpected CSV header", offset);
  std::vector<CsvRow> rows;
  while (next(line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 13) throw FormatError("expected 13 CSV fields", offset);
    try {
      CsvRow r;
      r.round = std::stoi(f[0]);
      r.strategy = f[1];
      r.seed = std::stoull(f[2]);
      r.psnr_db = std::stod(f[3]);
      r.mse = std::stod(f[4]);
      r.avg_client_loss = std::stod(f[5]);
      r.g_part = std::stod(f[6]);
      r.g_effort = std::stod(f[7]);
      r.total_steps = std::stod(f[8]);
      for (const auto& s : split(f[9], ';')) {
        if (!s.empty()) r.selected.push_back(std::stoul(s));
      }
      for (const auto& s : split(f[10], ';')) {
        if (!s.empty()) r.epochs.push_back(std::stoi(s));
      }
      r.efficiency = std::stod(f[11]);
      if (f[12] != "NA") r.rel_efficiency = std::stod(f[12]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("unparseable CSV row", offset);
    }
  }
  return rows;
}

std::string emit_summary(const std::vector<CsvRow>& rows) {
  if (rows.empty()) throw UsageError("summary needs at least one row");
  // Terminal row per (strategy, seed), strategies in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::map<std::uint64_t, const CsvRow*>> terminal;
  std::map<std::pair<std::string, std::uint64_t>, bool> all_zero_part;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.strategy) == order.end()) order.push_back(r.strategy);
    auto& slot = terminal[r.strategy][r.seed];
    if (!slot || r.round > slot->round) slot = &r;
    auto [it, inserted] = all_zero_part.try_emplace({r.strategy, r.seed}, true);
    it->second = it->second && r.g_part == 0.0;
  }

  std::ostringstream os;
  os << std::fixed;
  os << "strategy      seeds  psnr_mean  psnr_min  psnr_max  g_part  g_effort  rel_eff\n";
  for (const auto& s : order) {
    const auto& per_seed = terminal[s];
    double sum = 0, lo = 1e300, hi = -1e300, gp = 0, ge = 0, re = 0;
    bool have_re = true;
    for (const auto& [seed, r] : per_seed) {
      sum += r->psnr_db;
      lo = std::min(lo, r->psnr_db);
      hi = std::max(hi, r->psnr_db);
      gp += r->g_part;
      ge += r->g_effort;
      if (r->rel_efficiency) re += *r->rel_efficiency;
      else have_re = false;
    }
    const double n = static_cast<double>(per_seed.size());
    os << std::left << std::setw(12) << s << std::right << std::setw(7) << per_seed.size() << std::setprecision(3)
       << std::setw(11) << sum / n << std::setw(10) << lo << std::setw(10) << hi << std::setprecision(4)
       << std::setw(8) << gp / n << std::setw(10) << ge / n;
    if (have_re) os << std::setw(9) << std::setprecision(3) << re / n;
    else os << std::setw(9) << "NA";
    os << '\n';
  }
  os << "\nper seed (terminal round)\n";
  for (const auto& s : order) {
    for (const auto& [seed, r] : terminal[s]) {
      os << "  " << s << " seed=" << seed << " round=" << r->round << std::setprecision(3) << " psnr=" << r->psnr_db
         << std::setprecision(4) << " g_part=" << r->g_part << " g_effort=" << r->g_effort
         << " rel_eff=" << (r->rel_efficiency ? format_double(*r->rel_efficiency) : std::string("NA")) << '\n';
    }
  }
  const bool have_all = terminal.contains("baseline") && terminal.contains("utilitarian") &&
                        terminal.contains("prop_fair");
  if (have_all) {
    os << "\ntrends per seed\n";
    for (const auto& [seed, base] : terminal["baseline"]) {
      const auto u = terminal["utilitarian"].find(seed);
      const auto p = terminal["prop_fair"].find(seed);
      if (u == terminal["utilitarian"].end() || p == terminal["prop_fair"].end()) continue;
      const bool a = all_zero_part[{"baseline", seed}];
      const bool b = u->second->g_part >= p->second->g_part;
      const bool c = p->second->rel_efficiency && *p->second->rel_efficiency >= 1.0;
      os << "  seed=" << seed << " baseline_g_part_zero=" << (a ? "yes" : "no")
         << " util_g_part>=pf_g_part=" << (b ? "yes" : "no") << " pf_rel_eff>=1=" << (c ? "yes" : "no") << '\n';
    }
  }
  return os.str();
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw FormatError("cannot create output directory " + cfg.output_dir + ": " + ec.message(), 0);
  {
    std::ofstream os(fs::path(cfg.output_dir) / "rounds.csv", std::ios::binary);
    if (!os) throw FormatError("cannot write rounds.csv", 0);
    write_csv(os, result.rows);
  }
  std::ofstream os(fs::path(cfg.output_dir) / "summary.txt", std::ios::binary);
  if (!os) throw FormatError("cannot write summary.txt", 0);
  os << emit_summary(result.rows);
}

}  // namespace fedsem

namespace fedsem {

SelectionProblem parse_selection_problem(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::map<std::string, std::string> kv;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("selection file: expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    static const std::set<std::string> known{"epoch_budget", "max_epochs", "lambda", "utilities", "participation"};
    if (!known.contains(key)) throw ConfigError("selection key '" + key + "' is not recognized");
    if (!kv.emplace(key, trim(t.substr(eq + 1))).second) throw ConfigError("selection key '" + key + "' given twice");
  }
  if (!kv.contains("epoch_budget") || !kv.contains("utilities")) {
    throw ConfigError("selection file needs epoch_budget and utilities");
  }
  SelectionProblem p;
  p.epoch_budget = to_int("epoch_budget", kv["epoch_budget"]);
  p.max_epochs = kv.contains("max_epochs") ? to_int("max_epochs", kv["max_epochs"]) : p.epoch_budget;
  p.fairness_weight = kv.contains("lambda") ? to_double("lambda", kv["lambda"]) : 0.0;
  for (const auto& s : split(kv["utilities"], ',')) p.utilities.push_back(to_double("utilities", s));
  if (kv.contains("participation")) {
    for (const auto& s : split(kv["participation"], ',')) p.participation.push_back(to_integer("participation", s));
  } else {
    p.participation.assign(p.utilities.size(), 0);
  }
  p.validate();
  return p;
}

std::string format_plan(const SelectionPlan& plan) {
  std::ostringstream os;
  os << "epochs    = " << join(plan.epochs) << '\n';
  os << "selected  = " << join(plan.selected_clients()) << '\n';
  os << "objective = " << format_double(plan.objective) << '\n';
  return os.str();
}

}  // namespace fedsem
