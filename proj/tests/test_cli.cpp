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

// Drives the built `leafbg` executable end to end on a tiny generated corpus.
#include <sys/wait.h>

#include <cstdlib>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "leafbg/io.hpp"
#include "leafbg/trainer.hpp"
#include "test_util.hpp"

namespace leafbg {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun leafbg_cli(const fs::path& work, const std::string& args, const fs::path& log_dir) {
  const fs::path log = log_dir / "cli_output.txt";
  const fs::path config = fs::path(LEAFBG_SOURCE_DIR) / "configs/synthetic.cfg";
  const std::string cmd = fmt::format("'{}' --config '{}' --work-dir '{}' --set train.epochs=2 {} > '{}' 2>&1",
                                      LEAFBG_CLI_PATH, config.string(), work.string(), args, log.string());
  const int status = std::system(cmd.c_str());
  CliRun run;
  run.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  run.output = read_text_file(log);
  return run;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

class CliTest : public ::testing::Test {
 protected:
  CliRun run(const std::string& args) { return leafbg_cli(work_.path(), args, logs_.path()); }
  fs::path work() const { return work_.path(); }

  TempDir work_;
  TempDir logs_;
};

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("prepare --no-such-flag").code, 1);
  EXPECT_EQ(run("train --optimizer adam").code, 1);
  EXPECT_EQ(run("train --dataset 3 --optimizer adam").code, 1);
  EXPECT_EQ(run("--set nonsense.key=1 prepare --synthetic 3").code, 1);
  EXPECT_EQ(run("--set train.epochs=abc prepare --synthetic 3").code, 1);
  // a configured label table that does not exist is a configuration error
  EXPECT_EQ(run("--set corpus.label_table=/nonexistent/train.csv prepare").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, MissingInputsExitTwo) {
  const CliRun seg = run("segment");
  EXPECT_EQ(seg.code, 2) << seg.output;
  EXPECT_TRUE(contains(seg.output, "prepare")) << seg.output;
  EXPECT_EQ(run("matrix").code, 2);
  EXPECT_EQ(run("evaluate").code, 2);
}

TEST_F(CliTest, BadSaliencyModelExitsThree) {
  ASSERT_EQ(run("prepare --synthetic 3").code, 0);
  const fs::path bogus = work() / "bogus.onnx";
  write_text_file(bogus, "not a network");
  const CliRun r = run(fmt::format("--set segment.model={} segment --backend salient", bogus.string()));
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_FALSE(fs::exists(work() / "segment/verdicts.csv"));
}

TEST_F(CliTest, FullPipeline) {
  // prepare twice: identical manifests and provenance
  ASSERT_EQ(run("prepare --synthetic 8").code, 0);
  const std::string split_a = read_text_file(work() / "manifests/split.csv");
  const std::string prov_a = read_text_file(work() / "manifests/provenance.json");
  ASSERT_EQ(run("prepare --synthetic 8").code, 0);
  EXPECT_EQ(read_text_file(work() / "manifests/split.csv"), split_a);
  EXPECT_EQ(read_text_file(work() / "manifests/provenance.json"), prov_a);
  const auto prov = nlohmann::json::parse(prov_a);
  EXPECT_EQ(prov.at("stage"), "prepare");
  EXPECT_EQ(prov.at("config_digest").get<std::string>().size(), 64U);
  EXPECT_FALSE(contains(prov_a, "time"));

  // segment computes once, then reuses unless forced
  const CliRun first = run("segment");
  ASSERT_EQ(first.code, 0) << first.output;
  EXPECT_TRUE(contains(first.output, "reused), backend")) << first.output;
  const std::string d2 = read_text_file(work() / "datasets/dataset_2.csv");
  const CliRun again = run("segment");
  ASSERT_EQ(again.code, 0);
  EXPECT_TRUE(contains(again.output, "(0 computed")) << again.output;
  EXPECT_EQ(read_text_file(work() / "datasets/dataset_2.csv"), d2);
  const CliRun forced = run("segment --force");
  ASSERT_EQ(forced.code, 0);
  EXPECT_TRUE(contains(forced.output, ", 0 reused)")) << forced.output;
  EXPECT_EQ(read_text_file(work() / "datasets/dataset_2.csv"), d2);

  // interrupted + resumed training reproduces an uninterrupted run
  ASSERT_EQ(run("train --dataset 1 --optimizer adam --stop-after-epoch 1").code, 0);
  ASSERT_EQ(read_train_log(train_log_path(work() / "models", "dataset_1_adam")).size(), 1U);
  ASSERT_EQ(run("train --dataset 1 --optimizer adam --resume").code, 0);
  const auto resumed = read_train_log(train_log_path(work() / "models", "dataset_1_adam"));
  const std::string resumed_weights = read_text_file(final_checkpoint_path(work() / "models", "dataset_1_adam"));

  // one cell only: evaluate still reports it and exits 2 for the rest
  const CliRun partial = run("evaluate");
  EXPECT_EQ(partial.code, 2) << partial.output;
  EXPECT_TRUE(contains(partial.output, "missing checkpoints: dataset_1_rmsprop")) << partial.output;
  EXPECT_TRUE(fs::exists(work() / "report/confusion_dataset_1_adam.png"));

  ASSERT_EQ(run("train --dataset 1 --optimizer adam --force").code, 0);
  const auto straight = read_train_log(train_log_path(work() / "models", "dataset_1_adam"));
  ASSERT_EQ(straight.size(), resumed.size());
  for (std::size_t i = 0; i < straight.size(); ++i) {
    EXPECT_EQ(straight[i].train_loss, resumed[i].train_loss);
    EXPECT_EQ(straight[i].val_acc, resumed[i].val_acc);
  }
  EXPECT_EQ(read_text_file(final_checkpoint_path(work() / "models", "dataset_1_adam")), resumed_weights);

  const CliRun matrix = run("matrix --force");
  ASSERT_EQ(matrix.code, 0) << matrix.output;
  const CliRun eval = run("evaluate");
  ASSERT_EQ(eval.code, 0) << eval.output;
  const auto report = nlohmann::json::parse(read_text_file(work() / "report/report.json"));
  EXPECT_EQ(report.at("cells").size(), 4U);
  EXPECT_EQ(nlohmann::json::parse(read_text_file(work() / "report/provenance.json")).at("stage"), "evaluate");
  EXPECT_TRUE(fs::exists(work() / "report/summary.csv"));
}

}  // namespace
}  // namespace leafbg
