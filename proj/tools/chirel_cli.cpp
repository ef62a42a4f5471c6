// chirel: chiral-film electron scattering data generator.
//   chirel <subcommand> --config <path> [--out <dir>] [--threads N] [--skip-phi]
// CHIREL_CONFIG supplies the config path when --config is absent.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chirel/app.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"chiral-film electron scattering data generator"};
  cli.set_version_flag("--version", chirel::app::tool_version);
  std::string sub, config, out;
  int threads = 1;
  bool skip_phi = false;
  std::string choices;
  for (const auto& s : chirel::app::subcommands()) choices += (choices.empty() ? "" : ", ") + s;
  cli.add_option("subcommand", sub, "one of: " + choices)
      ->required()
      ->check(CLI::IsMember(chirel::app::subcommands()));
  cli.add_option("--config", config, "configuration file (default: $CHIREL_CONFIG)");
  cli.add_option("--out", out, "output directory (default: output.directory)");
  cli.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
  cli.add_flag("--skip-phi", skip_phi, "leave the elastic phase out of gamma");
  CLI11_PARSE(cli, argc, argv);

  if (config.empty()) {
    if (const char* env = std::getenv("CHIREL_CONFIG")) config = env;
  }
  if (config.empty()) {
    std::cerr << "error: no configuration (use --config or set CHIREL_CONFIG)\n";
    return 2;
  }
  try {
    const chirel::SimulationConfig cfg = chirel::parse_config(config);
    const auto m = chirel::app::run(sub, cfg, {out, threads, skip_phi});
    for (const auto& f : m.files) std::cout << f.sha256 << "  " << f.path << '\n';
    return 0;
  } catch (const chirel::ConfigError& e) {
    for (const auto& i : e.issues) std::cerr << "config error: " << i << '\n';
    return 2;
  } catch (const chirel::app::PartialResult& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
