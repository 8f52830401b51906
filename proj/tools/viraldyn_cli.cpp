/// Command line front end. Parses arguments with CLI11 and forwards each
/// subcommand to the shared library through the C interface.

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "viraldyn.h"

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "JSON configuration file")
      ->required();
  cmd->add_option("--out", args.out,
                  "Output directory (default: out_dir from the config)");
  cmd->add_option("--seed", args.seed, "Seed for stochastic steps");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Within-host viral dynamics with antibody effects"};
  app.require_subcommand(1);

  CommonArgs args;
  const char* commands[] = {"simulate", "equilibria", "stability", "fit",
                            "sweep"};
  const char* blurbs[] = {
      "Integrate the model and write the trajectory",
      "Compute thresholds and all equilibria",
      "Analyze stability of each equilibrium",
      "Fit free parameters to observations",
      "Run a one-parameter scenario sweep",
  };
  for (int i = 0; i < 5; ++i) {
    add_common(app.add_subcommand(commands[i], blurbs[i]), args);
  }

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  const vd_status status =
      vd_run(command.c_str(), args.config.c_str(),
             args.out.empty() ? nullptr : args.out.c_str(), args.seed);
  if (status != VD_OK) {
    std::fprintf(stderr, "viraldyn %s: %s\n", command.c_str(),
                 vd_last_error());
    return 1;
  }
  return 0;
}
