// gsn: prepare / train / eval / generate for graph-structured dialogue
// response generation. See README.md for the file formats.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gsn/cli.hpp"

namespace {

gsn::Config assemble_config(const std::string& config_path,
                            const std::vector<std::string>& overrides, bool seed_set,
                            unsigned long seed, const std::string& checkpoint) {
  gsn::Config cfg;
  if (!config_path.empty()) cfg = gsn::read_config_file(config_path);
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw gsn::ConfigError("override must look like key=value: " + kv);
    config_set(cfg, gsn::detail::trim(kv.substr(0, eq)), gsn::detail::trim(kv.substr(eq + 1)));
  }
  if (seed_set) cfg.hp.seed = seed;
  if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
  gsn::config_validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-structured network for multi-party dialogue response generation"};
  app.require_subcommand(1);

  std::string config_path, checkpoint;
  std::vector<std::string> overrides;
  unsigned long seed = 0;
  CLI::Option* seed_opt = nullptr;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file (key = value lines)");
    seed_opt = cmd->add_option("--seed", seed, "override the configured seed");
    cmd->add_option("--checkpoint", checkpoint, "checkpoint file to load");
    cmd->add_option("--set", overrides, "override one setting, key=value (repeatable)");
  };

  std::string raw_log, out_dir = "prepared", session_file;
  CLI::App* prepare = app.add_subcommand("prepare", "filter, split, and tokenize a raw chat log");
  prepare->add_option("raw_log", raw_log, "raw log: speaker<TAB>text lines, blank line between sessions")
      ->required();
  prepare->add_option("--out", out_dir, "output directory for splits, vocab, manifest");
  add_common(prepare);

  CLI::App* train = app.add_subcommand("train", "train on the prepared splits");
  add_common(train);

  CLI::App* eval = app.add_subcommand("eval", "greedy-decode the test split and report metrics");
  add_common(eval);

  CLI::App* generate = app.add_subcommand("generate", "decode one response per session in a file");
  generate->add_option("sessions", session_file, "canonical session file")->required();
  add_common(generate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? gsn::kExitOk : gsn::kExitUsage;
  }

  try {
    const gsn::Config cfg =
        assemble_config(config_path, overrides, seed_opt->count() > 0, seed, checkpoint);
    if (prepare->parsed()) {
      gsn::cmd_prepare(raw_log, out_dir, cfg, std::cout);
    } else if (train->parsed()) {
      gsn::cmd_train(cfg, std::cout);
    } else if (eval->parsed()) {
      std::cout << gsn::cmd_eval(cfg);
    } else if (generate->parsed()) {
      for (const std::string& line : gsn::cmd_generate(cfg, session_file)) std::cout << line << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return gsn::exit_code_for(e);
  }
  return gsn::kExitOk;
}
