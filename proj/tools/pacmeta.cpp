// pacmeta: sweep | train | adapt | audit | bound
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure, 1 anything else.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pacmeta/commands.hpp"

namespace {

struct Args {
  std::string config;
  std::vector<std::string> overrides;
  pacmeta::RunOptions run;
};

void add_common(CLI::App* cmd, Args& args) {
  cmd->add_option("--config", args.config, "configuration file");
  cmd->add_option("--set", args.overrides, "override, section.key=value (repeatable)");
  cmd->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { args.run.seed = v; }, "root seed");
  cmd->add_option_function<std::string>("--out", [&](const std::string& v) { args.run.out = v; }, "output path");
  cmd->add_option_function<std::size_t>("--jobs", [&](const std::size_t& v) { args.run.jobs = v; }, "worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PAC-Bayesian meta-learning bounds, two-prior meta-learning and bound audits"};
  app.require_subcommand(1);
  Args args;
  for (const char* name : {"sweep", "train", "adapt", "audit", "bound"}) add_common(app.add_subcommand(name), args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    pacmeta::Config cfg = args.config.empty() ? pacmeta::Config{} : pacmeta::Config::load(args.config);
    for (const auto& o : args.overrides) cfg.set(o);
    if (command == "sweep") {
      pacmeta::cmd_sweep(cfg, args.run);
    } else if (command == "train") {
      pacmeta::cmd_train(cfg, args.run);
    } else if (command == "adapt") {
      pacmeta::cmd_adapt(cfg, args.run);
    } else if (command == "audit") {
      pacmeta::cmd_audit(cfg, args.run);
    } else {
      pacmeta::cmd_bound(cfg, args.run, std::cout);
    }
  } catch (const pacmeta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pacmeta::DomainError& e) {
    std::cerr << "invalid setting: " << e.what() << "\n";
    return 2;
  } catch (const pacmeta::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
