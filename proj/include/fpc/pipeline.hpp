// Copyright 2026 The fpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpc/codec.hpp"
#include "fpc/data.hpp"
#include "fpc/evaluation.hpp"
#include "fpc/networks.hpp"
#include "fpc/training.hpp"

namespace fpc::run {

struct DataSizes {
  std::size_t train = 2048;
  std::size_t eval = 512;
  std::size_t probe = 64;
  // Index offsets keep the three splits disjoint.
  std::uint64_t eval_first = 1000000;
  std::uint64_t probe_first = 2000000;
};

// Everything a run depends on. `seed` drives data rendering, weight init and
// data order; the seed fields of `scene` and `plan` are overwritten by it.
struct RunConfig {
  std::uint64_t seed = 0;
  nets::SplitConfig split;
  data::SceneSpec scene;
  DataSizes data;
  train::TrainPlan plan;
  codec::ClipRange clip;         // bottleneck features
  codec::ClipRange anchor_clip;  // raw split features
  codec::CodecId codec = codec::CodecId::DctIntra;
  std::vector<int> qps{34, 36, 38, 40, 41, 42};
  std::vector<codec::ClipRange> clip_study{{-6, 6}, {-3, 3}, {-1.5, 1.5}};
  std::filesystem::path out_dir = "fpc_out";

  void set_seed(std::uint64_t s);
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
std::string dump_config(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);

// "FPOS" | version u8 | lr0, lr_floor, momentum f64 | step, total_steps u64 |
// entry count u32 | per entry: name length u16, name, length u32, f32 values.
std::vector<std::uint8_t> serialize_optim(const OptimState& s);
OptimState parse_optim(std::span<const std::uint8_t> bytes);

// On-disk layout of a run under cfg.out_dir.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path data_dir(const std::string& split) const { return root_ / "data" / split; }
  std::filesystem::path model_path(const std::string& name) const { return root_ / "models" / (name + ".fpck"); }
  std::filesystem::path optim_path(const std::string& name) const { return root_ / "optim" / (name + ".fpos"); }
  std::filesystem::path trace_path(const std::string& phase, const std::string& ext) const {
    return root_ / "traces" / (phase + "." + ext);
  }
  std::filesystem::path results_dir() const { return root_ / "results"; }

 private:
  std::filesystem::path root_;
};

struct Datasets {
  data::Dataset train, eval, probe;
};
Datasets make_datasets(const RunConfig& cfg);

// Freshly initialized models and optimizer states for a config.
nets::ModelSet init_models(const RunConfig& cfg);
train::Optimizers init_optimizers(const RunConfig& cfg);

struct AttackReport {
  train::Metrics bottleneck;
  train::Metrics latent;
  double psnr_gap() const { return bottleneck.psnr - latent.psnr; }
  double edge_psnr_gap() const { return bottleneck.edge_psnr - latent.edge_psnr; }
};

struct Comparison {
  eval::RDCurve proposed, anchor;
  std::vector<eval::NamedBD> bds;  // BD-rate first
};
Comparison compare_curves(const eval::RDCurve& anchor, const eval::RDCurve& proposed);

struct PipelineResult {
  nets::ModelSet models;
  nets::ModelGraph attack_bottleneck;
  nets::ModelGraph attack_latent;
  train::TrainTrace trace;
  AttackReport attacks;
  Comparison comparison;
};

// The whole experiment in memory: pretrain, AE-only, RecNet-only,
// adversarial, both attacks, both sweeps and the BD comparison.
PipelineResult run_pipeline(const RunConfig& cfg);

// File-backed stages, one per CLI subcommand. Each loads its inputs from the
// workspace, calls the same library operations as run_pipeline and writes its
// outputs back, so running them in order reproduces run_pipeline exactly.
void stage_gen_data(const RunConfig& cfg);
train::TrainTrace stage_pretrain(const RunConfig& cfg);
train::TrainTrace stage_train_ae(const RunConfig& cfg);
train::TrainTrace stage_train_recnet(const RunConfig& cfg);
train::TrainTrace stage_train_adversarial(const RunConfig& cfg);
train::TrainTrace stage_train_attack(const RunConfig& cfg, nets::RecNetVariant variant);
std::vector<eval::RDCurve> stage_sweep(const RunConfig& cfg, bool with_clip_study);
Comparison stage_report(const RunConfig& cfg);

nlohmann::json attack_report_json(const AttackReport& r);

}  // namespace fpc::run
