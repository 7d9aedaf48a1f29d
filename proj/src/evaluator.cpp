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

#include "leafbg/evaluator.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "leafbg/csv.hpp"
#include "leafbg/error.hpp"
#include "leafbg/io.hpp"

namespace leafbg {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : cells) {
    for (auto v : row) {
      n += v;
    }
  }
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    n += cells[k][k];
  }
  return n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t k) const {
  std::uint64_t n = 0;
  for (auto v : cells[k]) {
    n += v;
  }
  return n;
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t k) const {
  std::uint64_t n = 0;
  for (const auto& row : cells) {
    n += row[k];
  }
  return n;
}

ConfusionMatrix confusion(std::span<const Label> truth, std::span<const Label> predicted) {
  std::vector<int> t, p;
  for (Label l : truth) {
    t.push_back(static_cast<int>(index_of(l)));
  }
  for (Label l : predicted) {
    p.push_back(static_cast<int>(index_of(l)));
  }
  return confusion(std::span<const int>(t), std::span<const int>(p));
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    throw UsageError(fmt::format("confusion: {} true labels but {} predictions", truth.size(), predicted.size()));
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || t >= static_cast<int>(kNumClasses) || p < 0 || p >= static_cast<int>(kNumClasses)) {
      throw UsageError(fmt::format("confusion: unknown label value at sample {} (true {}, predicted {})", i, t, p));
    }
    ++cm.cells[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) {
    throw DataError("metrics: confusion matrix is empty");
  }
  const double n = static_cast<double>(total);
  MetricsReport report;
  report.accuracy = static_cast<double>(cm.trace()) / n;

  std::uint64_t supported_tp = 0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    ClassMetrics& m = report.per_class[k];
    const auto tp = static_cast<double>(cm.tp(k));
    const std::uint64_t predicted = cm.tp(k) + cm.fp(k);
    m.support = cm.row_sum(k);
    const std::string name(to_string(label_from_index(k)));
    if (predicted == 0) {
      m.precision_undefined = true;
      report.warnings.push_back("precision undefined for " + name + " (no predictions); reported as 0");
    } else {
      m.precision = tp / static_cast<double>(predicted);
    }
    if (m.support == 0) {
      m.recall_undefined = true;
      report.warnings.push_back("recall undefined for " + name + " (no samples); reported as 0");
    } else {
      m.recall = tp / static_cast<double>(m.support);
      supported_tp += cm.tp(k);
    }
    if (m.precision + m.recall == 0.0) {
      m.f1_undefined = true;
      report.warnings.push_back("f1 undefined for " + name + " (precision + recall = 0); reported as 0");
    } else {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }

    const double w = static_cast<double>(m.support);
    report.weighted.precision += w * m.precision;
    report.weighted.f1 += w * m.f1;
    report.macro.precision += m.precision;
    report.macro.recall += m.recall;
    report.macro.f1 += m.f1;
  }
  report.weighted.precision /= n;
  report.weighted.f1 /= n;
  // support_k * (TP_k / support_k) is TP_k; summing the integers keeps the
  // identity with accuracy exact instead of subject to rounding.
  report.weighted.recall = static_cast<double>(supported_tp) / n;
  const double k = static_cast<double>(kNumClasses);
  report.macro.precision /= k;
  report.macro.recall /= k;
  report.macro.f1 /= k;
  return report;
}

std::string CellResult::name() const { return fmt::format("{}_{}", to_string(dataset), to_string(optimizer)); }

ComparisonReport build_report(std::vector<CellResult> cells) {
  ComparisonReport report;
  if (cells.empty()) {
    return report;
  }
  report.test_manifest_digest = cells.front().test_manifest_digest;
  for (const auto& c : cells) {
    if (c.test_manifest_digest != report.test_manifest_digest) {
      throw DataError(fmt::format("cell {} was evaluated on a different test manifest ({} vs {})", c.name(),
                                  c.test_manifest_digest, report.test_manifest_digest));
    }
  }
  for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::rmsprop}) {
    const CellResult* d1 = nullptr;
    const CellResult* d2 = nullptr;
    for (const auto& c : cells) {
      if (c.optimizer == kind) {
        (c.dataset == DatasetName::dataset_1 ? d1 : d2) = &c;
      }
    }
    if (d1 != nullptr && d2 != nullptr) {
      report.delta_accuracy[kind] = d2->metrics.accuracy - d1->metrics.accuracy;
    }
  }
  report.cells = std::move(cells);
  return report;
}

namespace {

json averaged_to_json(const AveragedMetrics& a) {
  return {{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
}

AveragedMetrics averaged_from_json(const json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

json metrics_to_json(const MetricsReport& m) {
  json per_class = json::object();
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto& c = m.per_class[k];
    per_class[std::string(to_string(label_from_index(k)))] = {
        {"precision", c.precision},
        {"recall", c.recall},
        {"f1", c.f1},
        {"support", c.support},
        {"precision_undefined", c.precision_undefined},
        {"recall_undefined", c.recall_undefined},
        {"f1_undefined", c.f1_undefined}};
  }
  return {{"accuracy", m.accuracy},
          {"per_class", per_class},
          {"weighted", averaged_to_json(m.weighted)},
          {"macro", averaged_to_json(m.macro)},
          {"warnings", m.warnings}};
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport m;
  m.accuracy = j.at("accuracy").get<double>();
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const json& c = j.at("per_class").at(std::string(to_string(label_from_index(k))));
    auto& out = m.per_class[k];
    out.precision = c.at("precision").get<double>();
    out.recall = c.at("recall").get<double>();
    out.f1 = c.at("f1").get<double>();
    out.support = c.at("support").get<std::uint64_t>();
    out.precision_undefined = c.at("precision_undefined").get<bool>();
    out.recall_undefined = c.at("recall_undefined").get<bool>();
    out.f1_undefined = c.at("f1_undefined").get<bool>();
  }
  m.weighted = averaged_from_json(j.at("weighted"));
  m.macro = averaged_from_json(j.at("macro"));
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  return m;
}

}  // namespace

json to_json(const ComparisonReport& report) {
  json cells = json::object();
  for (const auto& c : report.cells) {
    json matrix = json::array();
    for (const auto& row : c.confusion.cells) {
      matrix.push_back(row);
    }
    cells[c.name()] = {{"dataset", std::string(to_string(c.dataset))},
                       {"optimizer", std::string(to_string(c.optimizer))},
                       {"confusion", matrix},
                       {"metrics", metrics_to_json(c.metrics)},
                       {"config_digest", c.config_digest},
                       {"test_manifest_digest", c.test_manifest_digest}};
  }
  json order = json::array();
  for (const auto& c : report.cells) {
    order.push_back(c.name());
  }
  json delta = json::object();
  for (const auto& [kind, d] : report.delta_accuracy) {
    delta[std::string(to_string(kind))] = d;
  }
  json classes = json::array();
  for (Label l : kAllLabels) {
    classes.push_back(std::string(to_string(l)));
  }
  return {{"classes", classes},
          {"cells", cells},
          {"cell_order", order},
          {"test_manifest_digest", report.test_manifest_digest},
          {"delta_accuracy", delta},
          {"evaluation_data", "raw test split"}};
}

ComparisonReport report_from_json(const json& j) {
  try {
    ComparisonReport report;
    report.test_manifest_digest = j.at("test_manifest_digest").get<std::string>();
    for (const auto& name : j.at("cell_order")) {
      const json& c = j.at("cells").at(name.get<std::string>());
      CellResult cell;
      cell.dataset = parse_dataset_name(c.at("dataset").get<std::string>());
      cell.optimizer = parse_optimizer_kind(c.at("optimizer").get<std::string>());
      const json& matrix = c.at("confusion");
      for (std::size_t r = 0; r < kNumClasses; ++r) {
        for (std::size_t col = 0; col < kNumClasses; ++col) {
          cell.confusion.cells[r][col] = matrix.at(r).at(col).get<std::uint64_t>();
        }
      }
      cell.metrics = metrics_from_json(c.at("metrics"));
      cell.config_digest = c.at("config_digest").get<std::string>();
      cell.test_manifest_digest = c.at("test_manifest_digest").get<std::string>();
      report.cells.push_back(std::move(cell));
    }
    for (const auto& [kind, d] : j.at("delta_accuracy").items()) {
      report.delta_accuracy[parse_optimizer_kind(kind)] = d.get<double>();
    }
    return report;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string render_confusion_text(const CellResult& cell) {
  std::string out = fmt::format("confusion matrix: {} (rows = true, columns = predicted)\n", cell.name());
  out += fmt::format("{:>10}", "");
  for (Label l : kAllLabels) {
    out += fmt::format("{:>10}", to_string(l));
  }
  out += "\n";
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    out += fmt::format("{:>10}", to_string(label_from_index(r)));
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      out += fmt::format("{:>10}", cell.confusion.cells[r][c]);
    }
    out += "\n";
  }
  const auto& m = cell.metrics;
  out += fmt::format("\naccuracy {:.4f}\n", m.accuracy);
  out += fmt::format("{:>10}{:>11}{:>11}{:>11}{:>9}\n", "", "precision", "recall", "f1", "support");
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto& c = m.per_class[k];
    out += fmt::format("{:>10}{:>11.4f}{:>11.4f}{:>11.4f}{:>9}\n", to_string(label_from_index(k)), c.precision,
                       c.recall, c.f1, c.support);
  }
  out += fmt::format("{:>10}{:>11.4f}{:>11.4f}{:>11.4f}\n", "weighted", m.weighted.precision, m.weighted.recall,
                     m.weighted.f1);
  out += fmt::format("{:>10}{:>11.4f}{:>11.4f}{:>11.4f}\n", "macro", m.macro.precision, m.macro.recall, m.macro.f1);
  return out;
}

cv::Mat render_confusion_image(const CellResult& cell) {
  constexpr int kCell = 110;
  constexpr int kLeft = 120;
  constexpr int kTop = 70;
  constexpr int kSize = static_cast<int>(kNumClasses);
  cv::Mat image(kTop + kSize * kCell + 50, kLeft + kSize * kCell + 20, CV_8UC3, cv::Scalar(255, 255, 255));
  const int font = cv::FONT_HERSHEY_SIMPLEX;
  cv::putText(image, cell.name(), {10, 25}, font, 0.6, {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(image, "predicted", {kLeft + kSize * kCell / 2 - 40, 48}, font, 0.45, {60, 60, 60}, 1, cv::LINE_AA);

  for (int r = 0; r < kSize; ++r) {
    const std::uint64_t row_total = cell.confusion.row_sum(static_cast<std::size_t>(r));
    for (int c = 0; c < kSize; ++c) {
      const std::uint64_t v = cell.confusion.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      const double share = row_total == 0 ? 0.0 : static_cast<double>(v) / static_cast<double>(row_total);
      const cv::Rect box(kLeft + c * kCell, kTop + r * kCell, kCell, kCell);
      // White to dark blue (BGR).
      const cv::Scalar fill(255 - share * 115, 255 - share * 200, 255 - share * 225);
      cv::rectangle(image, box, fill, cv::FILLED);
      cv::rectangle(image, box, {120, 120, 120}, 1);
      const std::string text = std::to_string(v);
      int baseline = 0;
      const cv::Size ts = cv::getTextSize(text, font, 0.8, 2, &baseline);
      const cv::Scalar ink = share > 0.5 ? cv::Scalar(255, 255, 255) : cv::Scalar(0, 0, 0);
      cv::putText(image, text, {box.x + (kCell - ts.width) / 2, box.y + (kCell + ts.height) / 2}, font, 0.8, ink, 2,
                  cv::LINE_AA);
    }
    cv::putText(image, std::string(to_string(label_from_index(static_cast<std::size_t>(r)))),
                {10, kTop + r * kCell + kCell / 2 + 5}, font, 0.5, {0, 0, 0}, 1, cv::LINE_AA);
  }
  for (int c = 0; c < kSize; ++c) {
    cv::putText(image, std::string(to_string(label_from_index(static_cast<std::size_t>(c)))),
                {kLeft + c * kCell + 25, kTop + kSize * kCell + 25}, font, 0.5, {0, 0, 0}, 1, cv::LINE_AA);
  }
  return image;
}

void write_report(const ComparisonReport& report, const fs::path& out_dir) {
  write_text_file(out_dir / "report.json", to_json(report).dump(2) + "\n");

  std::vector<std::vector<std::string>> rows;
  for (const auto& c : report.cells) {
    std::string delta;
    if (c.dataset == DatasetName::dataset_2) {
      const auto it = report.delta_accuracy.find(c.optimizer);
      if (it != report.delta_accuracy.end()) {
        delta = fmt::format("{:.4f}", 100.0 * it->second);
      }
    }
    const auto& m = c.metrics;
    rows.push_back({c.name(), std::string(to_string(c.dataset)), std::string(to_string(c.optimizer)),
                    fmt::format("{:.4f}", 100.0 * m.accuracy), fmt::format("{:.4f}", 100.0 * m.weighted.precision),
                    fmt::format("{:.4f}", 100.0 * m.weighted.recall), fmt::format("{:.4f}", 100.0 * m.weighted.f1),
                    delta});
  }
  csv::write(out_dir / "summary.csv",
             {"cell", "dataset", "optimizer", "accuracy_pct", "precision_pct", "recall_pct", "f1_pct",
              "delta_accuracy_pct_vs_dataset_1"},
             rows);

  for (const auto& c : report.cells) {
    write_text_file(out_dir / ("confusion_" + c.name() + ".txt"), render_confusion_text(c));
    write_image(out_dir / ("confusion_" + c.name() + ".png"), render_confusion_image(c));
  }
}

}  // namespace leafbg
