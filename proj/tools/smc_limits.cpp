#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "smclimits/commands.hpp"

int main(int argc, char** argv) {
  smclimits::configure_logging();
  CLI::App app{"Sequential Monte Carlo consistency and normality checks"};
  app.set_version_flag("--version", smclimits::kVersion);
  app.require_subcommand(1);

  smclimits::CommandOptions options;
  std::uint64_t seed = 0;
  for (const auto& name : smclimits::command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config_path, "JSON configuration file (default: built-in)");
    sub->add_option("--seed", seed, "Master seed overriding every seed in the config");
    sub->add_option("--out-dir", options.out_dir, "Directory for CSV and JSON artifacts")->capture_default_str();
    sub->add_option("--workers", options.workers, "Worker threads (never changes results)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : smclimits::kExitConfig;
  }

  const auto* chosen = app.get_subcommands().front();
  if (chosen->count("--seed") > 0) {
    options.seed = seed;
  }
  return smclimits::run_command(chosen->get_name(), options, std::cout, std::cerr);
}
