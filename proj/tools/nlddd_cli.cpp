// Command-line front end: run / check / export a configured experiment.
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "nlddd/runner.hpp"

namespace {

void print_summary(const nlddd::RunOutcome& out, bool timings) {
  if (out.state) {
    out.state->report.write(std::cout);
    if (timings) {
      for (const auto& [stage, secs] : out.state->timings) std::cerr << "time " << stage << ": " << secs << " s\n";
    }
  }
  if (out.exit_code != 0) std::cerr << "error: " << out.message << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Substructuring domain decomposition for nonlocal volume-constrained diffusion"};
  app.require_subcommand(1);
  std::string config_path;
  bool timings = false;
  std::string out_dir;

  auto* run_cmd = app.add_subcommand("run", "full pipeline; writes the artifacts selected in the config");
  auto* check_cmd = app.add_subcommand("check", "pipeline up to the coverage verification, no artifacts");
  auto* export_cmd = app.add_subcommand("export", "full pipeline; writes every artifact kind");
  for (auto* cmd : {run_cmd, check_cmd, export_cmd}) {
    cmd->add_option("config", config_path, "INI run configuration")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--timings", timings, "print stage timings to stderr");
    cmd->add_option("-o,--output", out_dir, "override outputs.directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : nlddd::exit_code(nlddd::ErrorCode::Config);
  }

  nlddd::RunConfig config;
  try {
    config = nlddd::load_config(config_path);
  } catch (const nlddd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return nlddd::exit_code(e.code());
  }
  if (!out_dir.empty()) config.output_dir = std::filesystem::absolute(out_dir);

  nlddd::RunOutcome out;
  if (*check_cmd) {
    out = nlddd::run(config, nlddd::Stage::Coverage, std::set<std::string>{});
  } else if (*export_cmd) {
    const auto& kinds = nlddd::artifact_kinds();
    out = nlddd::run(config, nlddd::Stage::Full, std::set<std::string>(kinds.begin(), kinds.end()));
  } else {
    out = nlddd::run(config);
  }
  print_summary(out, timings);
  return out.exit_code;
}
