// aadlab: synthetic domain-adaptation experiments from the command line.
//
// Subcommands:
//   gen-data            write a synthetic domain pair (4 jsonl splits + manifest)
//   run                 train/evaluate a method grid and write results tables
//   sweep-temperature   distillation temperature sweep (+ supervised column)

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aad/data.hpp"
#include "aad/eval.hpp"
#include "aad/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "aadlab 0.1.0";

struct GenOpts {
  double rho = 0.3;
  std::size_t vocab = 2000;
  std::size_t per_class = 1000;
  std::size_t min_len = 20;
  std::size_t max_len = 128;
  double class_token_rate = 0.25;
  std::size_t class_tokens = 50;
  std::size_t classes = 2;
  std::uint64_t seed = 0;
};

struct RunOpts {
  std::string data;  // manifest path; empty -> --gen required
  bool gen = false;
  GenOpts g;
  std::string methods = "baseline,aad";
  std::string seeds = "5";
  double temperature = 20.0;
  double kd_weight = 1.0;
  std::size_t epochs1 = 3;
  std::size_t epochs2 = 3;
  double lr1 = 5e-5;
  double lr2 = 1e-5;
  std::size_t batch = 64;
  double clip_norm = 1.0;
  double clip_value = 0.01;
  std::size_t d_steps = 1;
  double align_weight = 1.0;
  double dann_lambda = 1.0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 64;
  std::size_t jobs = 1;
  std::string out;
  std::string name;
  std::string config;
  bool dry_run = false;
  std::vector<double> temperatures{1, 2, 5, 10, 20, 50};
};

std::string default_out_root() {
  if (const char* env = std::getenv("AADLAB_OUT")) return env;
  return "out";
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// "--seeds 5" means seeds 0..4; "--seeds 3,7,9" is an explicit list.
std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::string> parts = split_csv(s);
  if (parts.empty()) throw CLI::ValidationError("--seeds", "empty seed list");
  for (const std::string& p : parts)
    if (p.find_first_not_of("0123456789") != std::string::npos)
      throw CLI::ValidationError("--seeds", "expected <count> or int list");
  if (parts.size() == 1 && s.find(',') == std::string::npos) {
    std::uint64_t n = std::stoull(parts[0]);
    if (n == 0) throw CLI::ValidationError("--seeds", "need >= 1 seed");
    std::vector<std::uint64_t> seeds(n);
    for (std::uint64_t i = 0; i < n; ++i) seeds[i] = i;
    return seeds;
  }
  std::vector<std::uint64_t> seeds;
  for (const std::string& p : parts) seeds.push_back(std::stoull(p));
  return seeds;
}

void add_gen_flags(CLI::App* app, GenOpts& g) {
  app->add_option("--rho", g.rho, "Pivot fraction of class vocabulary")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--vocab", g.vocab, "Vocabulary size");
  app->add_option("--per-class", g.per_class, "Source examples per class");
  app->add_option("--min-len", g.min_len, "Minimum document length");
  app->add_option("--max-len", g.max_len, "Maximum document length");
  app->add_option("--class-token-rate", g.class_token_rate,
                  "Per-token probability of drawing from the class pool");
  app->add_option("--class-tokens", g.class_tokens,
                  "Class pool size per (domain, class)");
  app->add_option("--classes", g.classes, "Number of classes");
  app->add_option("--data-seed", g.seed, "Generator seed");
}

void add_run_flags(CLI::App* app, RunOpts& o) {
  app->add_option("--data", o.data, "Dataset manifest path");
  app->add_flag("--gen", o.gen, "Generate a synthetic pair in-process");
  add_gen_flags(app, o.g);
  app->add_option("--methods", o.methods,
                  "Comma list: baseline,aad,aad-supervised,ddc,dann,coral");
  app->add_option("--seeds", o.seeds, "Seed count or comma list");
  app->add_option("--temperature,-t", o.temperature, "Distillation temperature");
  app->add_option("--kd-weight", o.kd_weight, "Distillation loss weight");
  app->add_option("--epochs1", o.epochs1, "Step-1 epochs");
  app->add_option("--epochs2", o.epochs2, "Step-2 epochs");
  app->add_option("--lr1", o.lr1, "Step-1 learning rate");
  app->add_option("--lr2", o.lr2, "Step-2 learning rate");
  app->add_option("--batch", o.batch, "Batch size");
  app->add_option("--clip-norm", o.clip_norm, "Encoder gradient norm clip");
  app->add_option("--clip-value", o.clip_value,
                  "Discriminator gradient value clip");
  app->add_option("--d-steps", o.d_steps, "Discriminator steps per generator step");
  app->add_option("--align-weight", o.align_weight,
                  "Alignment loss weight (ddc/dann/coral)");
  app->add_option("--dann-lambda", o.dann_lambda, "Gradient reversal scale");
  app->add_option("--embed-dim", o.embed_dim, "Embedding dimension");
  app->add_option("--hidden-dim", o.hidden_dim, "Representation dimension");
  app->add_option("--jobs", o.jobs, "Parallel (pair, method, seed) jobs");
  app->add_option("--out", o.out, "Output root (default $AADLAB_OUT or ./out)");
  app->add_option("--name", o.name, "Experiment name (subdirectory of --out)");
  app->add_flag("--dry-run", o.dry_run, "Print the resolved config and exit");
  app->add_option("--config", o.config,
                  "Flat key=value config file (defaults < file < flags)");
}

// Expands --config <file> into --key=value tokens inserted right after the
// subcommand, skipping keys already present on the command line. Keeps the
// precedence order: built-in defaults < config file < explicit flags.
std::vector<std::string> apply_config_file(std::vector<std::string> args) {
  std::string path;
  std::size_t sub_pos = std::string::npos;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (sub_pos == std::string::npos && !args[i].empty() && args[i][0] != '-')
      sub_pos = i;
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty() || sub_pos == std::string::npos) return args;

  auto present = [&](const std::string& key) {
    std::string flag = "--" + key;
    for (const std::string& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
      if (key == "temperature" && (a == "-t" || a.rfind("-t=", 0) == 0))
        return true;
    }
    return false;
  };

  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot read " + path);
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  };
  std::vector<std::string> extra;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--config", "expected key=value: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!present(key)) extra.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1,
              extra.begin(), extra.end());
  return args;
}

aad::GeneratorConfig to_generator_config(const GenOpts& g) {
  aad::GeneratorConfig cfg;
  cfg.vocab_size = g.vocab;
  cfg.pivot_fraction = g.rho;
  cfg.examples_per_class = g.per_class;
  cfg.min_len = g.min_len;
  cfg.max_len = g.max_len;
  cfg.class_token_rate = g.class_token_rate;
  cfg.class_tokens_per_class = g.class_tokens;
  cfg.num_classes = g.classes;
  cfg.seed = g.seed;
  return cfg;
}

aad::AdaptConfig to_adapt_config(const RunOpts& o) {
  aad::AdaptConfig cfg;
  cfg.step1 = {o.epochs1, o.lr1, o.batch};
  cfg.step2 = {o.epochs2, o.lr2, o.batch};
  cfg.temperature = o.temperature;
  cfg.kd_weight = o.kd_weight;
  cfg.clip_norm = o.clip_norm;
  cfg.clip_value = o.clip_value;
  cfg.d_steps_per_g_step = o.d_steps;
  cfg.align_weight = o.align_weight;
  cfg.dann_lambda = o.dann_lambda;
  cfg.model.embed_dim = o.embed_dim;
  cfg.model.hidden_dim = o.hidden_dim;
  cfg.model.num_classes = o.g.classes;
  return cfg;
}

json resolved_config(const RunOpts& o, const std::vector<std::uint64_t>& seeds,
                     const std::vector<std::string>& methods) {
  json j;
  j["version"] = kVersion;
  j["data"] = o.data.empty() ? json(nullptr) : json(o.data);
  j["gen"] = o.gen;
  if (o.gen) {
    j["generator"] = {{"rho", o.g.rho},
                      {"vocab", o.g.vocab},
                      {"per_class", o.g.per_class},
                      {"min_len", o.g.min_len},
                      {"max_len", o.g.max_len},
                      {"class_token_rate", o.g.class_token_rate},
                      {"class_tokens", o.g.class_tokens},
                      {"classes", o.g.classes},
                      {"data_seed", o.g.seed}};
  }
  j["methods"] = methods;
  j["seeds"] = seeds;
  j["temperature"] = o.temperature;
  j["kd_weight"] = o.kd_weight;
  j["epochs1"] = o.epochs1;
  j["epochs2"] = o.epochs2;
  j["lr1"] = o.lr1;
  j["lr2"] = o.lr2;
  j["batch"] = o.batch;
  j["clip_norm"] = o.clip_norm;
  j["clip_value"] = o.clip_value;
  j["d_steps"] = o.d_steps;
  j["align_weight"] = o.align_weight;
  j["dann_lambda"] = o.dann_lambda;
  j["embed_dim"] = o.embed_dim;
  j["hidden_dim"] = o.hidden_dim;
  j["jobs"] = o.jobs;
  return j;
}

std::string seeds_csv(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i)
    s += (i ? "," : "") + std::to_string(seeds[i]);
  return s;
}

std::string trace_id(const aad::RunResult& r) {
  std::string id = r.pair + "_" + r.method + "_" + std::to_string(r.seed);
  for (char& c : id)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      c = '_';
  return id;
}

// Resolves --data / --gen into named domain pairs. Pair id comes from the
// manifest's directory name so multi-dataset runs stay distinguishable.
std::map<std::string, aad::DomainPairDataset> resolve_pairs(const RunOpts& o) {
  std::map<std::string, aad::DomainPairDataset> pairs;
  if (!o.data.empty()) {
    fs::path p(o.data);
    std::string id = p.parent_path().filename().string();
    if (id.empty()) id = "dataset";
    pairs[id] = aad::load_dataset(o.data);
  } else if (o.gen) {
    pairs["synthetic"] = aad::generate_domain_pair(to_generator_config(o.g));
  } else {
    throw CLI::ValidationError("--data", "need --data <manifest> or --gen");
  }
  return pairs;
}

fs::path experiment_dir(const RunOpts& o, const std::string& default_name) {
  fs::path root = o.out.empty() ? default_out_root() : o.out;
  return root / (o.name.empty() ? default_name : o.name);
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

// Returns exit code: 0 all runs ok, 1 otherwise.
int report_failures(const std::vector<aad::RunResult>& results) {
  int rc = 0;
  for (const aad::RunResult& r : results)
    if (!r.ok) {
      std::cerr << "run failed: pair=" << r.pair << " method=" << r.method
                << " seed=" << r.seed << ": " << r.error << "\n";
      rc = 1;
    }
  return rc;
}

int cmd_gen_data(const RunOpts& o) {
  aad::GeneratorConfig cfg = to_generator_config(o.g);
  fs::path dir = experiment_dir(o, "dataset");
  fs::create_directories(dir);
  aad::DomainPairDataset ds = aad::generate_domain_pair(cfg);
  aad::save_dataset(ds, dir.string());
  json echo = {{"version", kVersion},
               {"rho", cfg.pivot_fraction},
               {"vocab", cfg.vocab_size},
               {"data_seed", cfg.seed},
               {"manifest", (dir / "manifest.json").string()}};
  std::cout << echo.dump(2) << "\n";
  return 0;
}

int cmd_run(const RunOpts& o) {
  std::vector<std::string> methods = split_csv(o.methods);
  if (methods.empty())
    throw CLI::ValidationError("--methods", "need at least one method");
  for (const std::string& m : methods)
    if (!aad::method_known(m))
      throw CLI::ValidationError("--methods", "unknown method: " + m);
  std::vector<std::uint64_t> seeds = parse_seeds(o.seeds);

  json cfg_echo = resolved_config(o, seeds, methods);
  std::cout << cfg_echo.dump(2) << "\n";
  if (o.dry_run) return 0;

  std::map<std::string, aad::DomainPairDataset> pairs = resolve_pairs(o);
  fs::path dir = experiment_dir(o, "run");
  fs::create_directories(dir / "traces");
  fs::create_directories(dir / "checkpoints");

  aad::AdaptConfig cfg = to_adapt_config(o);
  cfg.checkpoint_dir = (dir / "checkpoints").string();
  std::vector<aad::RunResult> results =
      aad::run_experiment(pairs, methods, seeds, cfg, std::max<std::size_t>(1, o.jobs));

  for (const aad::RunResult& r : results)
    write_file(dir / "traces" / (trace_id(r) + ".json"), aad::run_result_json(r));

  std::map<std::pair<std::string, std::string>, aad::CellResult> cells;
  for (const aad::RunResult& r : results) {
    if (!r.ok) continue;
    aad::CellResult& c = cells[{r.pair, r.method}];
    c.pair = r.pair;
    c.method = r.method;
    c.seed_accuracies.push_back(r.target_accuracy);
  }
  std::vector<aad::CellResult> cell_list;
  for (auto& [key, c] : cells) cell_list.push_back(c);
  aad::ResultsTable table = aad::aggregate(cell_list);

  std::string header = std::string("# version=") + kVersion +
                       "\n# seeds=" + seeds_csv(seeds) +
                       "\n# config=" + cfg_echo.dump() + "\n";
  write_file(dir / "results.csv", header + aad::emit_table(table, "csv"));

  json out;
  out["version"] = kVersion;
  out["seeds"] = seeds;
  out["config"] = cfg_echo;
  out["table"] = json::parse(aad::emit_table(table, "json"));
  json runs = json::array();
  for (const aad::RunResult& r : results)
    runs.push_back({{"pair", r.pair},
                    {"method", r.method},
                    {"seed", r.seed},
                    {"ok", r.ok},
                    {"target_accuracy", r.target_accuracy},
                    {"source_dev_before", r.source_dev_before},
                    {"source_dev_after", r.source_dev_after}});
  out["runs"] = runs;
  write_file(dir / "results.json", out.dump(2) + "\n");

  std::cout << aad::emit_table(table, "markdown");
  std::cout << "wrote " << (dir / "results.csv").string() << "\n";
  return report_failures(results);
}

int cmd_sweep_temperature(const RunOpts& o) {
  std::vector<std::uint64_t> seeds = parse_seeds(o.seeds);

  // one column per temperature plus the supervised variant
  std::vector<std::pair<std::string, aad::AdaptConfig>> columns;
  for (double t : o.temperatures) {
    aad::AdaptConfig cfg = to_adapt_config(o);
    cfg.temperature = t;
    cfg.method = "aad";
    std::ostringstream label;
    label << "t=" << t;
    columns.emplace_back(label.str(), cfg);
  }
  {
    aad::AdaptConfig cfg = to_adapt_config(o);
    cfg.method = "aad-supervised";
    columns.emplace_back("supervised", cfg);
  }

  json cfg_echo = resolved_config(o, seeds, {"aad", "aad-supervised"});
  cfg_echo["columns"] = json::array();
  for (const auto& [label, cfg] : columns)
    cfg_echo["columns"].push_back({{"label", label},
                                   {"method", cfg.method},
                                   {"temperature", cfg.temperature}});
  std::cout << cfg_echo.dump(2) << "\n";
  if (o.dry_run) return 0;

  std::map<std::string, aad::DomainPairDataset> pairs = resolve_pairs(o);
  fs::path dir = experiment_dir(o, "sweep");
  fs::create_directories(dir / "traces");
  fs::create_directories(dir / "checkpoints");

  // column label -> pair -> per-seed accuracies
  std::map<std::string, std::map<std::string, std::vector<double>>> acc;
  std::vector<aad::RunResult> all;
  for (const auto& [label, base] : columns) {
    aad::AdaptConfig cfg = base;
    cfg.checkpoint_dir = (dir / "checkpoints").string();
    std::vector<aad::RunResult> results = aad::run_experiment(
        pairs, {cfg.method}, seeds, cfg, std::max<std::size_t>(1, o.jobs));
    for (aad::RunResult& r : results) {
      r.method = label;  // disambiguate trace files across columns
      write_file(dir / "traces" / (trace_id(r) + ".json"),
                 aad::run_result_json(r));
      if (r.ok) acc[label][r.pair].push_back(r.target_accuracy);
      all.push_back(std::move(r));
    }
  }

  std::ostringstream csv;
  csv << "# version=" << kVersion << "\n# seeds=" << seeds_csv(seeds)
      << "\n# config=" << cfg_echo.dump() << "\n";
  csv << "pair,seed_count";
  for (const auto& [label, cfg] : columns) csv << "," << label;
  csv << "\n";
  for (const auto& [pair_id, ds] : pairs) {
    csv << pair_id << "," << seeds.size();
    for (const auto& [label, cfg] : columns) {
      const std::vector<double>& xs = acc[label][pair_id];
      double mean = 0.0, var = 0.0;
      for (double x : xs) mean += x;
      if (!xs.empty()) mean /= static_cast<double>(xs.size());
      for (double x : xs) var += (x - mean) * (x - mean);
      double sd = xs.size() > 1 ? std::sqrt(var / (xs.size() - 1.0)) : 0.0;
      csv << "," << aad::format_pct(mean) << "\xC2\xB1" << aad::format_pct(sd);
    }
    csv << "\n";
  }
  write_file(dir / "results.csv", csv.str());

  json out;
  out["version"] = kVersion;
  out["seeds"] = seeds;
  out["config"] = cfg_echo;
  json cols = json::array();
  for (const auto& [label, cfg] : columns) {
    json col = {{"label", label},
                {"method", cfg.method},
                {"temperature", cfg.temperature},
                {"accuracies", json::object()}};
    for (const auto& [pair_id, xs] : acc[label]) col["accuracies"][pair_id] = xs;
    cols.push_back(col);
  }
  out["columns"] = cols;
  write_file(dir / "results.json", out.dump(2) + "\n");

  std::cout << "wrote " << (dir / "results.csv").string() << "\n";
  return report_failures(all);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial adaptation with distillation: experiment harness"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunOpts gen_opts;
  CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic domain pair");
  add_gen_flags(gen, gen_opts.g);
  gen->add_option("--out", gen_opts.out, "Output root");
  gen->add_option("--name", gen_opts.name, "Dataset name (subdirectory)");
  gen->add_option("--config", gen_opts.config,
                  "Flat key=value config file (defaults < file < flags)");

  RunOpts run_opts;
  CLI::App* run = app.add_subcommand("run", "Run a method x seed experiment grid");
  add_run_flags(run, run_opts);

  RunOpts sweep_opts;
  CLI::App* sweep = app.add_subcommand("sweep-temperature",
                                       "Distillation temperature sweep");
  add_run_flags(sweep, sweep_opts);
  sweep->add_option("--temperatures", sweep_opts.temperatures,
                    "Temperature column values");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = apply_config_file(std::move(args));
    std::reverse(args.begin(), args.end());  // CLI11 consumes back-to-front
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage errors exit 2, --help/--version exit 0
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_opts);
    if (run->parsed()) return cmd_run(run_opts);
    if (sweep->parsed()) return cmd_sweep_temperature(sweep_opts);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
