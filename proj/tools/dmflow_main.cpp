// dmflow: synthesize, cluster, and analyze dark-market transaction ledgers.

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmflow/errors.hpp"
#include "dmflow/pipeline.hpp"
#include "dmflow/synth.hpp"

namespace {

using namespace dmflow;

int log_level() {
  const char* env = std::getenv("DMFLOW_LOG");
  if (!env) return 1;
  std::string v = env;
  if (v == "debug") return 2;
  if (v == "quiet" || v == "error") return 0;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "dmflow: %s\n", msg.c_str());
}

// One CLI instance per output directory.
class DirLock {
 public:
  explicit DirLock(const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    path_ = out_dir + "/.dmflow.lock";
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0 || ::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      throw BadConfig("output directory is locked by another dmflow instance: " +
                      path_);
    }
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

SynthConfig resolve_synth_config(const std::string& scenario,
                                 const std::string& config_path,
                                 std::uint64_t seed, bool seed_given) {
  SynthConfig cfg;
  if (!scenario.empty()) {
    const auto& lib = scenario_library();
    auto it = lib.find(scenario);
    if (it == lib.end()) {
      std::string known;
      for (const auto& [name, c] : lib) known += (known.empty() ? "" : ", ") + name;
      throw BadConfig("unknown scenario '" + scenario + "' (available: " + known + ")");
    }
    cfg = it->second;
  } else if (!config_path.empty()) {
    cfg = SynthConfig::from_json_file(config_path);
  } else {
    throw BadConfig("synth requires --scenario or --config");
  }
  if (seed_given) cfg.seed = seed;
  return cfg;
}

PipelineConfig default_paths(PipelineConfig cfg) {
  // Fill unset input paths from the output directory (where synth writes).
  namespace fs = std::filesystem;
  auto fill = [&](std::string& field, const char* name) {
    if (field.empty() && fs::exists(fs::path(cfg.out_dir) / name)) {
      field = (fs::path(cfg.out_dir) / name).string();
    }
  };
  fill(cfg.ledger_path, "ledger.jsonl");
  fill(cfg.prices_path, "prices.csv");
  fill(cfg.seeds_path, "seeds.csv");
  fill(cfg.markets_path, "markets.csv");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dark-market ledger synthesis and closure-migration analytics"};
  app.require_subcommand(1);

  std::string config_path, scenario, out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  PipelineConfig pcfg;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline or synth config JSON");
    cmd->add_option("--out", out_dir, "output directory")->required();
  };
  auto add_inputs = [&](CLI::App* cmd) {
    cmd->add_option("--ledger", pcfg.ledger_path, "ledger JSONL path");
    cmd->add_option("--prices", pcfg.prices_path, "price series CSV");
    cmd->add_option("--seeds", pcfg.seeds_path, "entity seed CSV");
    cmd->add_option("--markets", pcfg.markets_path, "market roster CSV");
  };
  auto add_analysis = [&](CLI::App* cmd) {
    cmd->add_option("--horizon-days", pcfg.horizon_days, "migrant window (days)");
    cmd->add_option("--flows-horizon-days", pcfg.flows_horizon_days,
                    "flow-matrix window (days)");
    cmd->add_option("--exclude", pcfg.exclude_markets,
                    "market excluded from rankings (repeatable)");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic ecosystem");
  add_common(synth);
  synth->add_option("--scenario", scenario, "named scenario configuration");
  auto* seed_opt = synth->add_option("--seed", seed, "RNG seed override");

  auto* cluster = app.add_subcommand("cluster", "co-spend + change clustering");
  add_common(cluster);
  add_inputs(cluster);

  auto* ego = app.add_subcommand("ego", "per-market ego network export");
  add_common(ego);
  add_inputs(ego);

  auto* metrics = app.add_subcommand("metrics", "weekly series and MACD");
  add_common(metrics);
  add_inputs(metrics);

  auto* migrate = app.add_subcommand("migrate", "closure migration analysis");
  add_common(migrate);
  add_inputs(migrate);
  add_analysis(migrate);

  auto* report = app.add_subcommand("report", "figure CSVs and summary JSON");
  add_common(report);
  add_inputs(report);
  add_analysis(report);

  auto* all = app.add_subcommand("all", "synth (optional) + full pipeline");
  add_common(all);
  add_inputs(all);
  add_analysis(all);
  all->add_option("--scenario", scenario, "generate this scenario first");
  auto* all_seed_opt = all->add_option("--seed", seed, "RNG seed override");

  CLI11_PARSE(app, argc, argv);
  seed_given = seed_opt->count() > 0 || all_seed_opt->count() > 0;

  try {
    DirLock lock(out_dir);

    // A pipeline config file provides defaults; flags override.
    if (!config_path.empty() && !app.got_subcommand(synth)) {
      PipelineConfig from_file = PipelineConfig::from_json_file(config_path);
      auto merge = [](std::string& dst, const std::string& src) {
        if (dst.empty()) dst = src;
      };
      merge(pcfg.ledger_path, from_file.ledger_path);
      merge(pcfg.prices_path, from_file.prices_path);
      merge(pcfg.seeds_path, from_file.seeds_path);
      merge(pcfg.markets_path, from_file.markets_path);
      if (pcfg.horizon_days == 7) pcfg.horizon_days = from_file.horizon_days;
      if (pcfg.flows_horizon_days == 30) {
        pcfg.flows_horizon_days = from_file.flows_horizon_days;
      }
      if (pcfg.exclude_markets.empty()) {
        pcfg.exclude_markets = from_file.exclude_markets;
      }
      if (from_file.week_anchor) pcfg.week_anchor = from_file.week_anchor;
    }
    pcfg.out_dir = out_dir;

    if (app.got_subcommand(synth)) {
      auto cfg = resolve_synth_config(scenario, config_path, seed, seed_given);
      auto files = generate_files(cfg, out_dir);
      info("wrote " + std::to_string(files.transactions) + " transactions to " +
           files.ledger_path);
      std::ofstream cfg_out(std::filesystem::path(out_dir) / "synth_config.json");
      cfg_out << cfg.to_json();
      return 0;
    }

    if (app.got_subcommand(all) && !scenario.empty()) {
      auto cfg = resolve_synth_config(scenario, "", seed, seed_given);
      auto files = generate_files(cfg, out_dir);
      info("synth: " + std::to_string(files.transactions) + " transactions");
      std::ofstream cfg_out(std::filesystem::path(out_dir) / "synth_config.json");
      cfg_out << cfg.to_json();
    }

    pcfg = default_paths(std::move(pcfg));
    Pipeline pipeline(pcfg);
    if (app.got_subcommand(cluster)) {
      pipeline.run_cluster();
    } else if (app.got_subcommand(ego)) {
      pipeline.run_ego();
    } else if (app.got_subcommand(metrics)) {
      pipeline.run_metrics();
    } else if (app.got_subcommand(migrate)) {
      pipeline.run_migrate();
    } else if (app.got_subcommand(report)) {
      pipeline.run_report();
    } else if (app.got_subcommand(all)) {
      pipeline.run_all();
    }
    info("done: " + std::to_string(pipeline.artifacts().size()) + " artifacts in " +
         out_dir);
    return 0;
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = typeid(e).name();
    err["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
