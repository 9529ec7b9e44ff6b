#include <iostream>

#include <CLI11.hpp>

#include "lgcav/lgcav.hpp"

namespace {

struct Sub {
  lgcav::Command cmd;
  const char* help;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-guided concept activation vectors"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t jobs = 0;
  bool quiet = false;

  const Sub subs[] = {
      {lgcav::Command::train, "train one CAV per concept and seed"},
      {lgcav::Command::eval, "score trained CAVs"},
      {lgcav::Command::correct, "fine-tune the head with activation-sample reweighting"},
      {lgcav::Command::synth, "generate a synthetic world and a run config for it"},
      {lgcav::Command::sweep, "train and score over a probe/lambda grid"},
      {lgcav::Command::probes, "write the probe sets chosen for each concept"},
  };
  std::vector<std::pair<CLI::App*, lgcav::Command>> apps;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(lgcav::to_string(s.cmd), s.help);
    sub->add_option("--config,-c", config_path, "run config JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "single seed, overrides 'seeds'");
    sub->add_option("--out,-o", out, "output directory, overrides 'output'");
    sub->add_option("--jobs,-j", jobs, "worker threads (0 = all cores)");
    sub->add_flag("--quiet,-q", quiet, "do not print the summary table");
    apps.emplace_back(sub, s.cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  lgcav::Command cmd = lgcav::Command::train;
  CLI::App* chosen = nullptr;
  for (auto& [sub, c] : apps)
    if (sub->parsed()) {
      cmd = c;
      chosen = sub;
    }

  try {
    lgcav::CliOverrides ov;
    if (chosen->count("--seed")) ov.seed = seed;
    if (chosen->count("--out")) ov.out = out;
    if (chosen->count("--jobs")) ov.jobs = jobs;
    const lgcav::RunConfig cfg = lgcav::load_run_config(config_path, cmd, ov);
    lgcav::json raw = lgcav::read_json(config_path);
    const lgcav::CommandResult res = lgcav::run_command(cmd, cfg, raw);
    lgcav::write_report(cfg, cmd, res);
    if (!quiet) std::cout << res.table;
    return 0;
  } catch (const lgcav::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return lgcav::exit_code(lgcav::classify(e.code()));
  } catch (const lgcav::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
