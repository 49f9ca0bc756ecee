#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "experiments.hpp"
#include "quasihom/error.hpp"

using namespace quasihom;

int main(int argc, char** argv) {
  // "--key value" settings are pulled out before CLI11 sees the arguments,
  // since the key set is open-ended.
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<std::string> args{argv[0]};
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    const bool option = arg.rfind("--", 0) == 0 && arg.size() > 2;
    std::string name = option ? arg.substr(2) : std::string();
    const auto eq = name.find('=');
    const std::string key = eq == std::string::npos ? name : name.substr(0, eq);
    if (!option || key == "config" || key == "jobs" || key == "out" || key == "help") {
      args.push_back(std::move(arg));
      continue;
    }
    if (eq != std::string::npos) {
      overrides.emplace_back(key, name.substr(eq + 1));
    } else if (i + 1 < argc) {
      overrides.emplace_back(key, argv[++i]);
    } else {
      std::cerr << "error: missing value for --" << key << "\n";
      return cli::kExitConfig;
    }
  }

  CLI::App app{"Iterated numerical homogenization for phi-Laplacian problems"};
  std::string experiment;
  std::string config_path;
  int jobs = 0;
  std::string out;
  app.add_option("experiment", experiment,
                 "solve, compare-methods, homogenization-error, regularization-study or sparse-update-study")
      ->required();
  app.add_option("--config", config_path, "key = value settings file");
  app.add_option("--jobs", jobs, "concurrent runs in parameter sweeps");
  app.add_option("--out", out, "output directory");
  app.footer("Any other --key value pair overrides the config file (e.g. --nfunc.p 5).");
  std::vector<const char*> cargs;
  for (const auto& a : args) cargs.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }

  try {
    cli::RunConfig config;
    if (!config_path.empty()) cli::apply(config, cli::read_config_file(config_path));
    for (const auto& [key, value] : overrides) cli::apply(config, key, value);
    config.experiment = cli::parse_experiment(experiment);
    if (jobs > 0) config.jobs = jobs;
    if (!out.empty()) config.out = out;
    const int code = cli::run(config, std::cout);
    if (code == 0) std::cout << "results written to " << config.out.string() << "\n";
    return code;
  } catch (const cli::Failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitSolver;
  }
}
