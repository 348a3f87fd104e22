#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "qdlab/errors.hpp"
#include "run_config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"qdlab: numerical experiments on quadratic differentials over hyperbolic collars"};
  app.set_version_flag("--version", qdcli::kVersion);
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool svg = false;
  std::optional<int> threads;
  for (const std::string& name : qdcli::command_names()) {
    CLI::App* sub = app.add_subcommand(name, qdcli::command_description(name));
    sub->add_option("--config", config_path, "JSON run config (schema v1)")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--out", out, "output directory");
    sub->add_flag("--svg", svg, "also write SVG line charts");
    sub->add_option("--threads", threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  qdcli::Overrides o;
  o.seed = seed;
  o.out = out;
  if (svg) o.svg = true;
  o.threads = threads;
  qdcli::RunConfig cfg;
  try {
    cfg = qdcli::load_config(command, config_path, o);
  } catch (const qdlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return qdcli::execute(cfg, std::cout, std::cerr);
}
