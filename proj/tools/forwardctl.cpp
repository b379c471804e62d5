#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "forwardctl/bench.hpp"

using namespace forwardctl;

namespace {

constexpr int kExitRank = 2;
constexpr int kExitLmi = 3;
constexpr int kExitSylvester = 4;
constexpr int kExitIo = 5;

int exit_code(DesignFailure::Kind k) {
  switch (k) {
    case DesignFailure::Kind::kRank: return kExitRank;
    case DesignFailure::Kind::kLmi: return kExitLmi;
    case DesignFailure::Kind::kSylvester: return kExitSylvester;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven cascade stabilisation by forwarding"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  for (const char* mode : {"collect", "design2", "designN", "sweep-n", "noise-sweep", "verify"}) {
    CLI::App* sub = app.add_subcommand(mode);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "override the configured seed (takes precedence over FORWARDCTL_SEED)");
    sub->add_option("--out", out_dir, "output root (default: the configured output_dir)");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string mode = app.get_subcommands().front()->get_name();

  try {
    RunConfig cfg = load_config(config_path);
    cfg.mode = parse_mode(mode);
    if (const char* env = std::getenv("FORWARDCTL_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw ConfigError(std::string("FORWARDCTL_SEED is not an unsigned integer: ") + env);
      }
    }
    if (app.get_subcommands().front()->count("--seed")) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    validate(cfg);
    const CommandResult r = run_command(cfg);
    std::cout << r.run_dir.string() << ": " << r.summary << "\n";
    return 0;
  } catch (const DesignFailure& e) {
    std::cerr << "forwardctl: design failed at " << e.what() << "\n";
    return exit_code(e.kind);
  } catch (const IoError& e) {
    std::cerr << "forwardctl: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "forwardctl: " << e.what() << "\n";
    return 1;
  }
}
