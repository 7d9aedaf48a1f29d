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

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "leafbg/corpus.hpp"
#include "leafbg/error.hpp"
#include "leafbg/io.hpp"
#include "test_util.hpp"

namespace leafbg {
namespace {

using testing::fake_records;
using testing::interleave;
using testing::TempDir;

void touch_image(const std::filesystem::path& path) {
  write_image(path, cv::Mat(8, 8, CV_8UC3, cv::Scalar(10, 200, 30)));
}

std::map<Label, std::size_t> count_labels(const std::vector<LabeledImageRecord>& records) {
  std::map<Label, std::size_t> out;
  for (const auto& r : records) {
    ++out[r.label];
  }
  return out;
}

// --- ingest ---------------------------------------------------------------

TEST(Ingest, NineRowTableGivesNineRecords) {
  TempDir dir;
  std::string table = "image_id,healthy,multiple_diseases,rust,scab\n";
  const char* onehot[] = {"1,0,0,0", "0,0,1,0", "0,0,0,1"};
  for (int i = 0; i < 9; ++i) {
    const std::string id = "Train_" + std::to_string(i);
    table += id + "," + onehot[i % 3] + "\n";
    touch_image(dir / ("images/" + id + ".png"));
  }
  write_text_file(dir / "train.csv", table);

  const IngestResult r = ingest(dir / "train.csv", dir / "images");
  EXPECT_EQ(r.records.size(), 9U);
  EXPECT_EQ(r.summary.dropped, 0U);
  EXPECT_EQ(r.summary.total, 9U);
  for (Label l : kAllLabels) {
    EXPECT_EQ(r.summary.per_class_counts.at(l), 3U);
  }
  for (const auto& rec : r.records) {
    EXPECT_EQ(rec.split, Split::unassigned);
    EXPECT_TRUE(std::filesystem::exists(rec.path));
  }
}

TEST(Ingest, DropsMultipleDiseasesAndCountsThem) {
  TempDir dir;
  std::string table = "image_id,healthy,multiple_diseases,rust,scab\n";
  table += "a,1,0,0,0\nb,0,1,0,0\nc,0,0,1,0\nd,0,1,0,0\n";
  for (const char* id : {"a", "c"}) {
    touch_image(dir / ("images/" + std::string(id) + ".jpg"));
  }
  write_text_file(dir / "train.csv", table);
  const IngestResult r = ingest(dir / "train.csv", dir / "images");
  EXPECT_EQ(r.records.size(), 2U);
  EXPECT_EQ(r.summary.dropped, 2U);
  // |records| + dropped = rows in table
  EXPECT_EQ(r.records.size() + r.summary.dropped, 4U);
}

TEST(Ingest, EmptyTableGivesNoRecords) {
  TempDir dir;
  write_text_file(dir / "train.csv", "image_id,healthy,multiple_diseases,rust,scab\n");
  std::filesystem::create_directories(dir / "images");
  const IngestResult r = ingest(dir / "train.csv", dir / "images");
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.summary.total, 0U);
  EXPECT_EQ(r.summary.dropped, 0U);
}

TEST(Ingest, MissingImagesAreListed) {
  TempDir dir;
  write_text_file(dir / "train.csv",
                  "image_id,healthy,multiple_diseases,rust,scab\nhere,1,0,0,0\ngone_1,0,0,1,0\ngone_2,0,0,0,1\n");
  touch_image(dir / "images/here.png");
  try {
    ingest(dir / "train.csv", dir / "images");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("gone_1"), std::string::npos);
    EXPECT_NE(what.find("gone_2"), std::string::npos);
  }
}

TEST(Ingest, RejectsZeroOrMultipleOneHot) {
  for (const char* row : {"x,0,0,0,0\n", "x,1,0,1,0\n"}) {
    TempDir dir;
    write_text_file(dir / "train.csv", std::string("image_id,healthy,multiple_diseases,rust,scab\n") + row);
    touch_image(dir / "images/x.png");
    EXPECT_THROW(ingest(dir / "train.csv", dir / "images"), DataError) << row;
  }
}

TEST(Ingest, RejectsWrongHeader) {
  TempDir dir;
  write_text_file(dir / "train.csv", "image_id,healthy,rust,scab\nx,1,0,0\n");
  EXPECT_THROW(ingest(dir / "train.csv", dir / "images"), DataError);
}

// --- balance --------------------------------------------------------------

TEST(Balance, PublicCorpusCountsGive516PerClass) {
  const auto records = interleave(fake_records({516, 622, 592}), 1);
  const auto out = balance(records, 42);
  EXPECT_EQ(out.size(), 1548U);
  for (const auto& [label, n] : count_labels(out)) {
    EXPECT_EQ(n, 516U) << to_string(label);
  }
}

TEST(Balance, AlreadyBalancedIsUnchanged) {
  const auto records = interleave(fake_records({10, 10, 10}), 2);
  EXPECT_EQ(balance(records, 9), records);
}

TEST(Balance, SubsetOfEachClass) {
  const auto records = fake_records({5, 3, 4});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto out = balance(records, seed);
    for (const auto& [label, n] : count_labels(out)) {
      EXPECT_EQ(n, 3U);
    }
    for (const auto& r : out) {
      EXPECT_NE(std::find(records.begin(), records.end(), r), records.end());
    }
  }
}

TEST(Balance, RequiresEveryClass) {
  EXPECT_THROW(balance(fake_records({3, 0, 2}), 1), DataError);
}

TEST(BalanceProperty, EqualCountsSubsetAndOrder) {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<std::size_t> counts{1 + rng.below(40), 1 + rng.below(40), 1 + rng.below(40)};
    const auto records = interleave(fake_records(counts), rng.next());
    const auto out = balance(records, rng.next());
    const std::size_t smallest = *std::min_element(counts.begin(), counts.end());
    const auto per = count_labels(out);
    ASSERT_EQ(per.size(), 3U);
    for (const auto& [label, n] : per) {
      EXPECT_EQ(n, smallest);
    }
    // output is a subsequence of the input
    std::size_t pos = 0;
    for (const auto& r : out) {
      while (pos < records.size() && !(records[pos] == r)) {
        ++pos;
      }
      ASSERT_LT(pos, records.size()) << "not an order-preserving subset";
      ++pos;
    }
  }
}

TEST(BalanceProperty, SeedChangesSubset) {
  const auto records = fake_records({50, 80, 70});
  EXPECT_EQ(balance(records, 5), balance(records, 5));
  EXPECT_NE(balance(records, 5), balance(records, 6));
}

// --- split ----------------------------------------------------------------

TEST(SplitCounts, KnownCases) {
  const SplitRatios r622 = SplitRatios::from_weights(6, 2, 2);
  EXPECT_EQ(split_counts(516, r622), (ClassSplitCounts{310, 103, 103}));
  EXPECT_EQ(split_counts(10, r622), (ClassSplitCounts{6, 2, 2}));
  EXPECT_EQ(split_counts(7, r622), (ClassSplitCounts{5, 1, 1}));
  EXPECT_EQ(split_counts(0, r622), (ClassSplitCounts{0, 0, 0}));
}

TEST(SplitCounts, FloorRemainderOracle) {
  // Integer oracle: floor(num * n / den), independent of the rational helper.
  for (std::int64_t tw = 1; tw <= 8; ++tw) {
    for (std::int64_t vw = 0; vw <= 4; ++vw) {
      for (std::int64_t sw = 0; sw <= 4; ++sw) {
        const SplitRatios r = SplitRatios::from_weights(tw, vw, sw);
        const std::int64_t total = tw + vw + sw;
        for (std::size_t n = 0; n <= 300; n += 7) {
          const auto c = split_counts(n, r);
          const auto val = static_cast<std::size_t>(vw * static_cast<std::int64_t>(n) / total);
          const auto test = static_cast<std::size_t>(sw * static_cast<std::int64_t>(n) / total);
          ASSERT_EQ(c.val, val);
          ASSERT_EQ(c.test, test);
          ASSERT_EQ(c.train, n - val - test);
        }
      }
    }
  }
}

TEST(SplitRatiosTest, Validation) {
  EXPECT_NO_THROW(SplitRatios{}.validate());
  EXPECT_THROW((SplitRatios{{1, 2}, {1, 5}, {1, 5}}.validate()), UsageError);
  EXPECT_THROW((SplitRatios{{3, 5}, {-1, 5}, {3, 5}}.validate()), UsageError);
  EXPECT_THROW((SplitRatios{{3, 0}, {1, 5}, {1, 5}}.validate()), UsageError);
  EXPECT_THROW(split(fake_records({3, 3, 3}), SplitRatios{{1, 2}, {1, 5}, {1, 5}}, 1), UsageError);
}

TEST(Split, FullCorpusScale) {
  const auto records = interleave(fake_records({516, 516, 516}), 3);
  const SplitManifest m = split(records, SplitRatios::from_weights(6, 2, 2), 11);
  for (Label l : kAllLabels) {
    EXPECT_EQ(m.per_class_split_counts.at(l), (ClassSplitCounts{310, 103, 103}));
  }
  EXPECT_EQ(m.partition(Split::train).size(), 930U);
  EXPECT_EQ(m.partition(Split::val).size(), 309U);
  EXPECT_EQ(m.partition(Split::test).size(), 309U);
}

TEST(SplitProperty, PartitionStratifiedDeterministic) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    const auto records = interleave(fake_records({n, n, n}), rng.next());
    const SplitRatios ratios = SplitRatios::from_weights(6, 2, 2);
    const std::uint64_t seed = rng.next();
    const SplitManifest m = split(records, ratios, seed);

    ASSERT_EQ(m.records.size(), records.size());
    std::set<std::string> seen;
    std::map<Label, ClassSplitCounts> tally;
    for (std::size_t i = 0; i < m.records.size(); ++i) {
      const auto& r = m.records[i];
      ASSERT_NE(r.split, Split::unassigned);
      // same record, same position; only the split field differs
      ASSERT_EQ(r.image_id, records[i].image_id);
      ASSERT_EQ(r.label, records[i].label);
      ASSERT_TRUE(seen.insert(r.image_id).second);
      auto& c = tally[r.label];
      (r.split == Split::train ? c.train : r.split == Split::val ? c.val : c.test)++;
    }
    for (Label l : kAllLabels) {
      ASSERT_EQ(tally[l], split_counts(n, ratios));
      ASSERT_EQ(m.per_class_split_counts.at(l), tally[l]);
    }
    const std::size_t parts = m.partition(Split::train).size() + m.partition(Split::val).size() +
                              m.partition(Split::test).size();
    ASSERT_EQ(parts, records.size());
    ASSERT_EQ(split(records, ratios, seed), m);
  }
}

TEST(SplitProperty, SeedChangesAssignment) {
  const auto records = fake_records({30, 30, 30});
  const auto ratios = SplitRatios::from_weights(6, 2, 2);
  EXPECT_NE(split(records, ratios, 1).records, split(records, ratios, 2).records);
}

TEST(SplitManifestIo, RoundTripAndByteStable) {
  TempDir dir;
  const auto records = interleave(fake_records({17, 17, 17}), 4);
  const SplitManifest m = split(records, SplitRatios::from_weights(6, 2, 2), 99);
  write_split_manifest(m, dir / "a/split.csv");
  write_split_manifest(m, dir / "b/split.csv");
  EXPECT_TRUE(testing::same_bytes(dir / "a/split.csv", dir / "b/split.csv"));
  EXPECT_TRUE(testing::same_bytes(dir / "a/split.meta.json", dir / "b/split.meta.json"));
  EXPECT_EQ(read_split_manifest(dir / "a/split.csv"), m);

  const std::string header = read_text_file(dir / "a/split.csv").substr(0, 26);
  EXPECT_EQ(header, "image_id,path,label,split\n");
}

TEST(SplitManifestIo, TamperedCountsAreRejected) {
  TempDir dir;
  const SplitManifest m = split(fake_records({10, 10, 10}), SplitRatios::from_weights(6, 2, 2), 1);
  write_split_manifest(m, dir / "split.csv");
  std::string text = read_text_file(dir / "split.csv");
  const auto pos = text.find(",train\n");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 7, ",test\n");
  write_text_file(dir / "split.csv", text);
  EXPECT_THROW(read_split_manifest(dir / "split.csv"), DataError);
}

TEST(Summary, TotalIsSumOfCounts) {
  const auto records = fake_records({4, 7, 2});
  const CorpusSummary s = summarize(records, 5);
  EXPECT_EQ(s.total, 13U);
  EXPECT_EQ(s.per_class_counts.at(Label::rust), 7U);
  EXPECT_EQ(s.seed, 5U);
}

TEST(LabelTable, WriteThenIngest) {
  TempDir dir;
  auto records = fake_records({2, 3, 1});
  for (auto& r : records) {
    r.path = dir / ("images/" + r.image_id + ".png");
    touch_image(r.path);
  }
  write_label_table(dir / "train.csv", records);
  const IngestResult back = ingest(dir / "train.csv", dir / "images");
  ASSERT_EQ(back.records.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back.records[i].image_id, records[i].image_id);
    EXPECT_EQ(back.records[i].label, records[i].label);
  }
}

}  // namespace
}  // namespace leafbg
