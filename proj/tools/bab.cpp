// bab: run benchmark suites, rebuild reports, verify replay logs.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bab/harness.hpp"

namespace {

using namespace bab;

enum ExitCode { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kIoError = 3 };

struct RunOptions {
  std::vector<int> stages;
  std::uint64_t seed = 0;
  std::string seeds_file;
  int runs = 0;
  std::string primary_model = "random";
  std::string primary_url;
  std::string ref_model = "random";
  std::string ref_url;
  bool no_coop = false;
  std::string locale = "en";
  std::string macc = "moves";
  std::string out = "results";
  std::string config_file;
};

std::vector<std::uint64_t> read_seeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open seeds file " + path);
  std::vector<std::uint64_t> seeds;
  std::string tok;
  while (in >> tok) {
    if (tok.front() == '#') {
      std::getline(in, tok);
      continue;
    }
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("seeds file: '" + tok + "' is not a seed");
    }
  }
  if (seeds.empty()) throw ConfigError("seeds file " + path + " lists no seeds");
  return seeds;
}

void apply_remote_key(agents::BackendSpec& spec, const std::string& key, const KeyValue& kv) {
  auto* remote = std::get_if<agents::RemoteSpec>(&spec);
  if (!remote) return;  // decoding settings do not apply to local backends
  if (key == "temperature") {
    try {
      remote->temperature = std::stod(kv.value);
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(kv.line) + ": temperature expects a number");
    }
  } else if (key == "max_tokens") {
    remote->max_tokens = parse_int(kv);
  } else if (key == "timeout") {
    remote->timeout_seconds = parse_int(kv);
  } else if (key == "retries") {
    remote->max_retries = parse_int(kv);
  } else if (key == "backoff_ms") {
    remote->backoff_initial_ms = parse_int(kv);
  } else if (key == "url") {
    remote->base_url = kv.value;
  } else {
    throw ConfigError("line " + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
  }
}

struct FileConfig {
  StageOverrides overrides;
  std::vector<KeyValue> model_keys;
  std::vector<std::uint64_t> seeds;
};

FileConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto [overrides, rest] = parse_stage_overrides(parse_key_values(ss.str()));
  FileConfig fc;
  fc.overrides = std::move(overrides);
  for (const auto& kv : rest) {
    if (kv.key.rfind("primary.", 0) == 0 || kv.key.rfind("reference.", 0) == 0) {
      fc.model_keys.push_back(kv);
    } else if (kv.key == "seeds") {
      std::stringstream list(kv.value);
      std::string tok;
      while (std::getline(list, tok, ',')) {
        KeyValue one{kv.key, trim(tok), kv.line};
        fc.seeds.push_back(static_cast<std::uint64_t>(parse_int(one)));
      }
    } else {
      throw ConfigError("line " + std::to_string(kv.line) + ": unknown key '" + kv.key + "'");
    }
  }
  return fc;
}

int cmd_run(const RunOptions& o) {
  std::vector<harness::RunConfig> suite;
  FileConfig fc;
  if (!o.config_file.empty()) fc = read_config(o.config_file);

  agents::BackendSpec primary = agents::backend_from_model(o.primary_model, o.primary_url);
  agents::BackendSpec reference = agents::backend_from_model(o.ref_model, o.ref_url);
  for (const auto& kv : fc.model_keys) {
    const auto dot = kv.key.find('.');
    apply_remote_key(kv.key.substr(0, dot) == "primary" ? primary : reference, kv.key.substr(dot + 1), kv);
  }
  for (const auto* spec : {&primary, &reference}) {
    if (const auto* r = std::get_if<agents::RemoteSpec>(spec); r && r->base_url.empty()) {
      throw ConfigError("model '" + r->model + "' needs a base url (--primary-url/--ref-url or BAB_BASE_URL)");
    }
  }

  std::vector<std::uint64_t> seeds = fc.seeds;
  if (!o.seeds_file.empty()) seeds = read_seeds(o.seeds_file);
  if (seeds.empty()) {
    const int runs = o.runs > 0 ? o.runs : agents::is_local(primary) ? harness::kDefaultLocalRuns
                                                                      : harness::kDefaultRemoteRuns;
    for (int i = 0; i < runs; ++i) seeds.push_back(o.seed + static_cast<std::uint64_t>(i));
  } else if (o.runs > 0) {
    if (static_cast<std::size_t>(o.runs) > seeds.size()) {
      throw ConfigError("--runs " + std::to_string(o.runs) + " exceeds the " + std::to_string(seeds.size()) +
                        " listed seeds");
    }
    seeds.resize(static_cast<std::size_t>(o.runs));
  }

  for (int stage : o.stages) {
    harness::RunConfig cfg;
    cfg.stage_id = stage;
    cfg.seeds = seeds;
    cfg.primary = primary;
    cfg.reference = reference;
    cfg.coop_enabled = !o.no_coop;
    cfg.locale = locale_from_name(o.locale);
    cfg.macc = macc_denominator_from_name(o.macc);
    cfg.overrides = fc.overrides;
    cfg.out_dir = o.out;
    (void)cfg.stage();  // validate before any episode runs
    suite.push_back(std::move(cfg));
  }

  const auto res = harness::run_benchmark(suite, o.out);
  for (const auto& f : res.failures) {
    std::cerr << "episode failed: stage " << f.stage << " seed " << f.seed << ": " << f.message << "\n";
  }
  if (!res.rows.empty()) {
    harness::write_summary(std::cout, metrics::aggregate(res.rows));
  }
  std::cout << "wrote " << res.log_paths.size() << " logs to " << o.out << "\n";
  return kOk;
}

int cmd_report(const std::string& dir) {
  const auto rows = harness::report_dir(dir);
  harness::write_summary(std::cout, metrics::aggregate(rows));
  return kOk;
}

int cmd_verify(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) {
    std::cerr << "cannot open " << path << "\n";
    return kIoError;
  }
  const auto r = harness::replay_verify_file(path);
  if (r.ok) {
    std::cout << "PASS" << (r.partial ? " (partial log, no end record)" : "") << "\n";
    return kOk;
  }
  std::cout << "FAIL";
  if (r.turn >= 0) std::cout << " at turn " << r.turn;
  std::cout << ": " << r.reason << "\n";
  return kVerifyFailed;
}

int cmd_stages() {
  std::cout << "stage turns agents teams bases npcs goal             coop\n";
  for (int s = 1; s <= 7; ++s) {
    const StageConfig c = default_stage(s);
    std::cout << harness::cell(std::to_string(s), 6) << harness::cell(std::to_string(c.turn_cap), 6)
              << harness::cell(std::to_string(c.n_agents), 7) << harness::cell(std::to_string(c.n_teams), 6)
              << harness::cell(std::to_string(c.n_bases), 6) << harness::cell(std::to_string(c.n_npcs), 5)
              << harness::cell(std::string(goal_name(c.goal)), 17) << topology_name(c.coop_topology) << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turn-based tank battle benchmark for language-model agents"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "Run episodes and write logs, results.csv and summary.txt");
  run->add_option("--stage", ro.stages, "Stage id (repeatable)")->required()->check(CLI::Range(1, 7));
  run->add_option("--seed", ro.seed, "First seed; runs use consecutive seeds");
  run->add_option("--seeds", ro.seeds_file, "File listing seeds (whitespace separated)");
  run->add_option("--runs", ro.runs, "Episodes per stage (default 3 remote, 5 local)")->check(CLI::PositiveNumber);
  run->add_option("--primary-model", ro.primary_model, "Primary backend: random, greedy, canned:PATH or a model name");
  run->add_option("--primary-url", ro.primary_url, "Chat-completions base url for the primary model");
  run->add_option("--ref-model", ro.ref_model, "Reference backend for secondary agents");
  run->add_option("--ref-url", ro.ref_url, "Chat-completions base url for the reference model");
  run->add_flag("--no-coop", ro.no_coop, "Remove the cooperation interface");
  run->add_option("--locale", ro.locale, "Prompt language")->check(CLI::IsMember({"en", "zh"}));
  run->add_option("--macc-denominator", ro.macc, "Move accuracy denominator")
      ->check(CLI::IsMember({"moves", "formatted"}));
  run->add_option("--out", ro.out, "Output directory");
  run->add_option("--config", ro.config_file, "key = value file with stage and model overrides");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Rebuild results.csv and summary.txt from logs");
  report->add_option("dir", report_dir, "Results directory")->required();

  std::string log_path;
  auto* verify = app.add_subcommand("verify", "Re-simulate a replay log and check every outcome");
  verify->add_option("log", log_path, "Replay log")->required();

  auto* stages = app.add_subcommand("stages", "Print the default stage settings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(ro);
    if (*report) return cmd_report(report_dir);
    if (*verify) return cmd_verify(log_path);
    if (*stages) return cmd_stages();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const LoadError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}
