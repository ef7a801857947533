// aes: batch essay-scoring pipeline for Devanagari text.
//
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 internal error.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "aes/pipeline.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::string> prompt;
  std::optional<std::string> model;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_model) {
  cmd->add_option("--config", args.config_path, "Run configuration (JSON)")
      ->required();
  cmd->add_option("--prompt", [&args](const CLI::results_t& r) {
    args.prompt = r.at(0);
    return true;
  }, "Restrict to one prompt id");
  if (with_model) {
    cmd->add_option("--model", [&args](const CLI::results_t& r) {
      args.model = r.at(0);
      return true;
    }, "Model file (default: per-prompt files in the output directory)");
  }
  cmd->add_option("--seed", [&args](const CLI::results_t& r) {
    args.seed = std::stoull(r.at(0));
    return true;
  }, "Override the config seed");
}

aes::RunConfig load_config(const CommonArgs& args) {
  aes::RunConfig config = aes::RunConfig::load(args.config_path);
  if (args.seed) config.seed = *args.seed;
  return config;
}

std::optional<aes::fs::path> model_path(const CommonArgs& args) {
  if (!args.model) return std::nullopt;
  return aes::fs::path(*args.model);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automated essay scoring for Devanagari (Hindi) text"};
  app.require_subcommand(1);

  CommonArgs featurize_args, train_args, predict_args, evaluate_args,
      report_args;
  CLI::App* featurize =
      app.add_subcommand("featurize", "Extract features and write the split");
  add_common(featurize, featurize_args, false);
  CLI::App* train =
      app.add_subcommand("train", "Train one model per prompt");
  add_common(train, train_args, false);
  CLI::App* predict =
      app.add_subcommand("predict", "Score essays with trained models");
  add_common(predict, predict_args, true);
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "QWK evaluation on the test split");
  add_common(evaluate, evaluate_args, true);
  CLI::App* report = app.add_subcommand("report", "Render the stored report");
  add_common(report, report_args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (featurize->parsed()) {
      auto config = load_config(featurize_args);
      auto result = aes::cmd_featurize(config);
      std::cout << "featurized " << result.n_essays << " essays -> "
                << result.features_path.string() << "\n";
      std::cout << "split -> " << result.split_path.string() << "\n";
    } else if (train->parsed()) {
      auto config = load_config(train_args);
      auto result = aes::cmd_train(config, train_args.prompt);
      for (const auto& p : result.prompts) {
        std::cout << "prompt " << p.prompt_id << ": train_qwk=" << p.train_qwk
                  << " validation_qwk=" << p.validation_qwk << " -> "
                  << p.model_path.string() << "\n";
      }
      std::cout << "log -> " << result.log_path.string() << "\n";
    } else if (predict->parsed()) {
      auto config = load_config(predict_args);
      auto result = aes::cmd_predict(config, model_path(predict_args),
                                     predict_args.prompt);
      std::cout << "predicted " << result.n << " essays -> "
                << result.predictions_path.string() << "\n";
    } else if (evaluate->parsed()) {
      auto config = load_config(evaluate_args);
      auto result = aes::cmd_evaluate(config, model_path(evaluate_args),
                                      evaluate_args.prompt);
      std::cout << result.table;
      std::cout << "report -> " << result.report_path.string() << "\n";
    } else if (report->parsed()) {
      auto config = load_config(report_args);
      std::cout << aes::cmd_report(config);
    }
  } catch (const aes::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
