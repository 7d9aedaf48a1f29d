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

#include "leafbg/config.hpp"

#include <charconv>
#include <functional>

#include <fmt/format.h>

#include "leafbg/digest.hpp"
#include "leafbg/error.hpp"
#include "leafbg/io.hpp"

namespace leafbg {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) {
    return {};
  }
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError(fmt::format("config key {}: '{}' is not a non-negative integer", key, v));
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw UsageError(fmt::format("config key {}: '{}' is not an integer", key, v));
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) {
      return out;
    }
  } catch (const std::exception&) {
  }
  throw UsageError(fmt::format("config key {}: '{}' is not a number", key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    return false;
  }
  throw UsageError(fmt::format("config key {}: '{}' is not a boolean", key, v));
}

SplitRatios to_ratios(const std::string& key, const std::string& v) {
  std::vector<std::int64_t> parts;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto colon = v.find(':', start);
    const std::string piece = v.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
    parts.push_back(static_cast<std::int64_t>(to_u64(key, piece)));
    if (colon == std::string::npos) {
      break;
    }
    start = colon + 1;
  }
  if (parts.size() != 3) {
    throw UsageError(fmt::format("config key {}: expected train:val:test weights, got '{}'", key, v));
  }
  SplitRatios r = SplitRatios::from_weights(parts[0], parts[1], parts[2]);
  r.validate();
  return r;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value,
                                  const fs::path& base)>;

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  if (p.is_relative() && !base.empty()) {
    p = base / p;
  }
  return p.lexically_normal();
}

struct KeySpec {
  std::string help;
  Setter set;
};

OptimizerConfig& opt(PipelineConfig& c, OptimizerKind kind) { return c.optimizers[kind]; }

const std::map<std::string, KeySpec>& key_table() {
  static const std::map<std::string, KeySpec> table = [] {
    std::map<std::string, KeySpec> t;
    auto path_key = [&t](const std::string& name, std::string help, fs::path PipelineConfig::*member) {
      t[name] = {std::move(help), [member](PipelineConfig& c, const std::string&, const std::string& v,
                                           const fs::path& base) { c.*member = resolve(base, v); }};
    };
    path_key("work_dir", "directory holding every stage's outputs", &PipelineConfig::work_dir);
    path_key("corpus.label_table", "one-hot label CSV (image_id,healthy,multiple_diseases,rust,scab)",
             &PipelineConfig::label_table);
    path_key("corpus.image_dir", "directory of <image_id>.jpg/.png files", &PipelineConfig::image_dir);
    path_key("segment.model", "saliency network (.onnx) for the salient backend", &PipelineConfig::saliency_model);
    path_key("gate.manual_rejects", "text file of image ids to reject after segmentation",
             &PipelineConfig::manual_rejects);

    auto seed_key = [&t](const std::string& name, std::string help, std::uint64_t Seeds::*member) {
      t[name] = {std::move(help), [member](PipelineConfig& c, const std::string& k, const std::string& v,
                                           const fs::path&) { c.seeds.*member = to_u64(k, v); }};
    };
    seed_key("seed", "master seed; other seeds default to it", &Seeds::master);
    seed_key("seed.balance", "class downsampling", &Seeds::balance);
    seed_key("seed.split", "train/val/test assignment", &Seeds::split);
    seed_key("seed.init", "random initialisation of trainable weights (shared by all cells)", &Seeds::init);
    seed_key("seed.shuffle", "per-epoch shuffling and dropout", &Seeds::shuffle);
    seed_key("seed.synthetic", "synthetic corpus generation", &Seeds::synthetic);

    t["split.ratios"] = {"train:val:test weights, default 6:2:2",
                         [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                           c.ratios = to_ratios(k, v);
                         }};
    t["segment.backend"] = {"salient | baseline",
                            [](PipelineConfig& c, const std::string&, const std::string& v, const fs::path&) {
                              c.segment_backend = parse_backend_kind(v);
                            }};
    t["segment.threshold"] = {"saliency binarisation threshold in (0,1), default 0.5",
                              [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                                c.segment_threshold = to_double(k, v);
                              }};
    t["gate.min_fraction"] = {"smallest accepted foreground fraction, default 0.05",
                              [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                                c.gate_bounds.min_fraction = to_double(k, v);
                              }};
    t["gate.max_fraction"] = {"largest accepted foreground fraction, default 0.95",
                              [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                                c.gate_bounds.max_fraction = to_double(k, v);
                              }};
    t["preprocess.size"] = {"square input size, default 224",
                            [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                              c.preprocess.target_size = to_int(k, v);
                            }};
    t["preprocess.interpolation"] = {"bilinear | nearest | area | bicubic",
                                     [](PipelineConfig& c, const std::string&, const std::string& v,
                                        const fs::path&) { c.preprocess.interpolation = parse_interpolation(v); }};
    t["backbone.kind"] = {"onnx | patch_color",
                          [](PipelineConfig& c, const std::string&, const std::string& v, const fs::path&) {
                            c.backbone.kind = parse_trunk_kind(v);
                          }};
    t["backbone.bundle"] = {"directory with trunk.onnx and tail.lbgt",
                            [](PipelineConfig& c, const std::string&, const std::string& v, const fs::path& base) {
                              c.backbone.bundle_dir = resolve(base, v);
                            }};
    t["backbone.allow_random_init"] = {"permit randomly initialised backbone weights, default false",
                                       [](PipelineConfig& c, const std::string& k, const std::string& v,
                                          const fs::path&) { c.backbone.allow_random_init = to_bool(k, v); }};
    t["freeze_boundary"] = {"trailing backbone stages that train: 0, 1 or 2 (default 2)",
                            [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                              c.backbone.freeze_boundary = to_int(k, v);
                            }};
    t["head.dropout_rate"] = {"dropout after each hidden dense layer, default 0.5",
                              [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                                c.head.dropout_rate = to_double(k, v);
                              }};
    t["head.bn_momentum"] = {"moving-statistics momentum of the head batch norm, default 0.99",
                             [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                               c.head.bn_momentum = to_double(k, v);
                             }};
    t["train.epochs"] = {"epochs per cell, default 50",
                         [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                           c.epochs = to_int(k, v);
                         }};
    t["train.batch_size"] = {"mini-batch size, default 16",
                             [](PipelineConfig& c, const std::string& k, const std::string& v, const fs::path&) {
                               c.batch_size = to_int(k, v);
                             }};

    for (OptimizerKind kind : {OptimizerKind::adam, OptimizerKind::rmsprop}) {
      const std::string prefix = fmt::format("optimizer.{}.", to_string(kind));
      auto real_key = [&t, kind, &prefix](const std::string& field, double OptimizerConfig::*member) {
        const double fallback = default_optimizer(kind).*member;
        t[prefix + field] = {fmt::format("{} {}, default {}", to_string(kind), field, fallback), [kind, member](PipelineConfig& c, const std::string& k, const std::string& v,
                                                const fs::path&) { opt(c, kind).*member = to_double(k, v); }};
      };
      real_key("learning_rate", &OptimizerConfig::learning_rate);
      real_key("epsilon", &OptimizerConfig::epsilon);
      if (kind == OptimizerKind::adam) {
        real_key("beta_1", &OptimizerConfig::beta_1);
        real_key("beta_2", &OptimizerConfig::beta_2);
        t[prefix + "amsgrad"] = {"adam amsgrad variant, default false", [](PipelineConfig& c, const std::string& k, const std::string& v,
                                        const fs::path&) { opt(c, OptimizerKind::adam).amsgrad = to_bool(k, v); }};
      } else {
        real_key("rho", &OptimizerConfig::rho);
        real_key("momentum", &OptimizerConfig::momentum);
      }
    }
    return t;
  }();
  return table;
}

}  // namespace

ConfigValues parse_config_text(std::string_view text, std::string_view source) {
  ConfigValues values;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(fmt::format("{}:{}: expected key = value", source, line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw UsageError(fmt::format("{}:{}: empty key", source, line_no));
    }
    values[key] = value;
  }
  return values;
}

ConfigValues read_config_file(const fs::path& path) {
  if (!fs::exists(path)) {
    throw UsageError("config file not found: " + path.string());
  }
  return parse_config_text(read_text_file(path), path.string());
}

PipelineConfig make_config(const ConfigValues& values, const fs::path& base_dir) {
  PipelineConfig c;
  const auto& table = key_table();
  // Seeds that are not set explicitly follow the master seed; track which were set.
  std::map<std::string, bool> explicit_seed;
  for (const auto& [key, value] : values) {
    const auto it = table.find(key);
    if (it == table.end()) {
      throw UsageError("unknown config key '" + key + "'");
    }
    it->second.set(c, key, value, base_dir);
    if (key.rfind("seed.", 0) == 0) {
      explicit_seed[key] = true;
    }
  }
  auto follow = [&](const char* key, std::uint64_t& seed) {
    if (!explicit_seed.contains(key)) {
      seed = c.seeds.master;
    }
  };
  follow("seed.balance", c.seeds.balance);
  follow("seed.split", c.seeds.split);
  follow("seed.init", c.seeds.init);
  follow("seed.shuffle", c.seeds.shuffle);
  follow("seed.synthetic", c.seeds.synthetic);
  c.backbone.init_seed = c.seeds.init;

  if (c.epochs < 1 || c.batch_size < 1) {
    throw UsageError("train.epochs and train.batch_size must be at least 1");
  }
  if (c.backbone.freeze_boundary < 0 || c.backbone.freeze_boundary > kTailStages) {
    throw UsageError(fmt::format("freeze_boundary must be between 0 and {}", kTailStages));
  }
  if (!(c.segment_threshold > 0.0 && c.segment_threshold < 1.0)) {
    throw UsageError("segment.threshold must lie in (0, 1)");
  }
  if (c.gate_bounds.min_fraction >= c.gate_bounds.max_fraction) {
    throw UsageError("gate.min_fraction must be below gate.max_fraction");
  }
  c.head.validate();
  for (const auto& [kind, o] : c.optimizers) {
    o.validate();
  }
  return c;
}

const std::map<std::string, std::string>& config_keys() {
  static const std::map<std::string, std::string> keys = [] {
    std::map<std::string, std::string> out;
    for (const auto& [k, spec] : key_table()) {
      out[k] = spec.help;
    }
    return out;
  }();
  return keys;
}

json PipelineConfig::to_json() const {
  json ratios_json = json::array();
  for (const Ratio& r : {ratios.train, ratios.val, ratios.test}) {
    ratios_json.push_back({r.num, r.den});
  }
  json opts = json::object();
  for (const auto& [kind, o] : optimizers) {
    opts[std::string(to_string(kind))] = leafbg::to_json(o);
  }
  return {{"work_dir", work_dir.string()},
          {"corpus", {{"label_table", label_table.string()}, {"image_dir", image_dir.string()}}},
          {"seeds",
           {{"master", seeds.master},
            {"balance", seeds.balance},
            {"split", seeds.split},
            {"init", seeds.init},
            {"shuffle", seeds.shuffle},
            {"synthetic", seeds.synthetic}}},
          {"split_ratios", ratios_json},
          {"segment",
           {{"backend", std::string(to_string(segment_backend))},
            {"model", saliency_model.string()},
            {"threshold", segment_threshold},
            {"gate_min_fraction", gate_bounds.min_fraction},
            {"gate_max_fraction", gate_bounds.max_fraction},
            {"manual_rejects", manual_rejects.string()}}},
          {"preprocess", leafbg::to_json(preprocess)},
          {"backbone", leafbg::to_json(backbone)},
          {"head", leafbg::to_json(head)},
          {"train", {{"epochs", epochs}, {"batch_size", batch_size}}},
          {"optimizers", opts}};
}

std::string PipelineConfig::digest() const { return sha256_hex(to_json().dump()); }

}  // namespace leafbg
