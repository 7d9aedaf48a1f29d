/**
 * Copyright 2026 The leafbg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// leafbg: prepare -> segment -> train/matrix -> evaluate.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "leafbg/config.hpp"
#include "leafbg/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> work_dir;
  std::vector<std::string> overrides;
  leafbg::CommandOptions options;
  std::string backend;
  std::string dataset;
  std::string optimizer;
};

leafbg::PipelineConfig load_config(const Flags& flags) {
  namespace fs = std::filesystem;
  leafbg::ConfigValues values;
  fs::path base = fs::current_path();
  if (!flags.config.empty()) {
    values = leafbg::read_config_file(flags.config);
    base = fs::absolute(flags.config).parent_path();
  }
  // Flags win over the file. --set paths resolve against the current directory.
  if (flags.seed) {
    values["seed"] = std::to_string(*flags.seed);
  }
  for (const auto& item : flags.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw leafbg::UsageError("--set expects key=value, got '" + item + "'");
    }
    values[item.substr(0, eq)] = item.substr(eq + 1);
  }
  leafbg::PipelineConfig config = leafbg::make_config(values, base);
  if (flags.work_dir) {
    config.work_dir = fs::absolute(*flags.work_dir).lexically_normal();
  }
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leaf disease classification with background-removal augmentation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Flags flags;
  app.add_option("--config", flags.config, "Flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Master seed (overrides the config)");
  app.add_option("--work-dir", flags.work_dir, "Work directory (overrides the config)");
  app.add_option("--set", flags.overrides, "Override one config key, key=value (repeatable)");
  bool list_keys = false;
  app.add_flag("--list-config-keys", list_keys, "Print the accepted config keys and exit");

  auto* synth = app.add_subcommand("synth", "Generate the synthetic corpus into <work_dir>/corpus");
  auto* prepare = app.add_subcommand("prepare", "Ingest, balance and split the corpus");
  auto* segment = app.add_subcommand("segment", "Segment training images, gate them, build dataset_2");
  auto* train = app.add_subcommand("train", "Train one cell of the experiment matrix");
  auto* matrix = app.add_subcommand("matrix", "Train all four cells");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate checkpoints on the raw test split");

  std::size_t synthetic_n = 0;
  for (auto* sub : {synth, prepare}) {
    sub->add_option("--synthetic", synthetic_n, "Images per class for a generated corpus");
  }
  segment->add_flag("--force", flags.options.force, "Recompute masks that already exist");
  segment->add_option("--backend", flags.backend, "salient | baseline")
      ->check(CLI::IsMember({"salient", "baseline"}));
  train->add_option("--dataset", flags.dataset, "1 | 2")->required()->check(CLI::IsMember({"1", "2"}));
  train->add_option("--optimizer", flags.optimizer, "adam | rmsprop")
      ->required()
      ->check(CLI::IsMember({"adam", "rmsprop"}));
  for (auto* sub : {train, matrix}) {
    sub->add_flag("--resume", flags.options.resume, "Continue from the last completed epoch");
    sub->add_option("--stop-after-epoch", flags.options.stop_after_epoch,
                    "Stop once this many epochs are complete (simulates an interruption)");
  }
  for (auto* sub : {synth, prepare, train, matrix, evaluate}) {
    sub->add_flag("--force", flags.options.force, "Overwrite existing outputs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(leafbg::ExitCode::usage);
  }

  try {
    if (list_keys) {
      for (const auto& [key, help] : leafbg::config_keys()) {
        std::cout << fmt::format("{:<34} {}\n", key, help);
      }
      return 0;
    }
    if (synthetic_n > 0) {
      flags.options.synthetic = synthetic_n;
    }
    if (!flags.backend.empty()) {
      flags.options.backend = leafbg::parse_backend_kind(flags.backend);
    }
    if (!flags.dataset.empty()) {
      flags.options.dataset = leafbg::parse_dataset_name(flags.dataset);
    }
    if (!flags.optimizer.empty()) {
      flags.options.optimizer = leafbg::parse_optimizer_kind(flags.optimizer);
    }
    const leafbg::PipelineConfig config = load_config(flags);

    leafbg::ExitCode code = leafbg::ExitCode::ok;
    if (*synth) {
      code = leafbg::cmd_synth(config, flags.options, std::cout);
    } else if (*prepare) {
      code = leafbg::cmd_prepare(config, flags.options, std::cout);
    } else if (*segment) {
      code = leafbg::cmd_segment(config, flags.options, std::cout);
    } else if (*train) {
      code = leafbg::cmd_train(config, flags.options, std::cout);
    } else if (*matrix) {
      code = leafbg::cmd_matrix(config, flags.options, std::cout);
    } else if (*evaluate) {
      code = leafbg::cmd_evaluate(config, flags.options, std::cout);
    }
    return static_cast<int>(code);
  } catch (const leafbg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(leafbg::ExitCode::runtime);
  }
}
