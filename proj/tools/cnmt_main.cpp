// Command-line driver. Exit codes: 0 success, 1 usage error, 2 invalid
// configuration, 3 runtime failure.

#include <CLI11.hpp>
#include <exception>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "cnmt/config.hpp"
#include "cnmt/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Cache-based document-level NMT"};

  std::vector<std::string> commands = cnmt::pipeline_commands();
  commands.push_back("config");
  std::string command;
  app.add_option("command", command, "gen-synthetic, train-lda, train-baseline, train-cache, "
                                     "translate, evaluate, or config (print resolved settings)")
      ->required()
      ->check(CLI::IsMember(commands));
  std::string config_path;
  app.add_option("-c,--config", config_path, "INI file; flags below override it")
      ->check(CLI::ExistingFile);

  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;
  for (const auto& key : cnmt::config_keys()) {
    std::string help = key.help + " [" + key.fallback + "]";
    options[key.name] = app.add_option("--" + key.name, overrides[key.name], help)
                            ->group("Settings")
                            ->type_name("VALUE");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    cnmt::Config config = config_path.empty() ? cnmt::Config() : cnmt::Config::load(config_path);
    for (const auto& [name, opt] : options)
      if (opt->count() > 0) config.set(name, overrides[name]);
    if (command == "config") {
      std::cout << config.render();
      return 0;
    }
    cnmt::run_command(command, config, std::cerr);
  } catch (const cnmt::ValidationError& e) {
    std::cerr << "cnmt: invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cnmt: " << command << " failed: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
