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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fpc/data.hpp"
#include "fpc/losses.hpp"
#include "fpc/networks.hpp"
#include "fpc/optim.hpp"

namespace fpc::train {

struct TrainPlan {
  std::size_t pretrain_epochs = 5;
  std::size_t ae_epochs = 5;
  std::size_t recnet_epochs = 2;
  std::size_t adversarial_epochs = 4;
  std::size_t attack_epochs = 4;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  loss::LossConfig loss;
  OptimState optim;  // lr0, lr_floor and momentum act as the template for every model

  void validate() const;
  // ae/recnet/adversarial epochs = round(factor * {50, 20, 40}), at least 1 each.
  static TrainPlan scaled(double factor);
};

struct EpochRecord {
  std::string phase;
  std::size_t epoch = 0;
  double l_obj = 0;
  double l_rec = 0;
  double l_tot = 0;
  double acc = 0;  // task-chain accuracy on the probe set (NaN without one)
  double probe_psnr = 0;  // attack PSNR on the probe set (NaN when the phase has no attacker)
  double probe_edge_psnr = 0;
};

struct CheckpointHash {
  std::string phase;
  std::string model;
  std::string hash;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  std::vector<CheckpointHash> checkpoints;

  void append(const TrainTrace& other);
  // epoch,l_obj,l_rec,l_tot,acc,probe_psnr,probe_edge_psnr,phase
  std::string to_csv() const;
  std::string to_json() const;
};

// One optimizer per trainable model. Each cosine horizon spans every phase
// the model is trained in.
struct Optimizers {
  OptimState frontend, backend, ae, ad, recnet;

  static Optimizers for_plan(const TrainPlan& plan, std::size_t train_size);
};

std::size_t steps_per_epoch(std::size_t train_size, std::size_t batch_size);

// Data-order streams. Epoch e of a phase visits the training set in the order
// shuffled_indices(N, Rng::derive(seed, stream, e)).
inline constexpr std::uint64_t kOrderPretrain = 1;
inline constexpr std::uint64_t kOrderAe = 2;
inline constexpr std::uint64_t kOrderRecnet = 3;
inline constexpr std::uint64_t kOrderAdversarial = 4;
inline constexpr std::uint64_t kOrderAttack = 5;

enum class AdvStage { RecnetUpdate, AutoencoderUpdate };

struct AdversarialOptions {
  bool recnet_steps = true;      // steps 1 and 2
  bool autoencoder_steps = true;  // steps 3 and 4
  // Fingerprints every model around each update and throws TrainingError if
  // anything outside the step's target set changed.
  bool verify_freeze = false;
  std::optional<std::uint64_t> order_stream;
  // Called after step 2 and after step 4 of every batch.
  std::function<void(AdvStage, std::size_t batch)> observer;
};

struct Metrics {
  double psnr = 0;
  double edge_psnr = 0;
};

// Attack quality of a reconstruction in the networks' [0, 1] scale against the
// original [0, 255] images. The reconstruction is scaled to [0, 255] and
// clamped before measuring.
Metrics reconstruction_metrics(const Tensor4D& recon_unit, const Tensor4D& images_255);

// Drives the phased schedule over one ModelSet. Models and optimizer states are
// borrowed so that phases can be run across separate processes.
class Session {
 public:
  Session(nets::ModelSet& models, Optimizers& optimizers, const TrainPlan& plan,
          const data::Dataset& train, const data::Dataset* probe = nullptr);

  // Trains frontend + backend on the task loss, then freezes both.
  TrainTrace pretrain_task();
  // Trains AE + AD on the task loss through the frozen task nets.
  TrainTrace train_ae_phase();
  // Trains RecNet on the reconstruction loss from frozen frontend + AE.
  TrainTrace train_recnet_phase();
  TrainTrace adversarial_phase(const AdversarialOptions& opts = {});
  EpochRecord adversarial_epoch(std::size_t epoch, const AdversarialOptions& opts = {});

  const TrainPlan& plan() const { return plan_; }

 private:
  double probe_accuracy(bool full_chain) const;
  Metrics probe_attack() const;
  void require_task_frozen(const char* phase) const;
  void record_hashes(TrainTrace& trace, const std::string& phase) const;

  nets::ModelSet& m_;
  Optimizers& opt_;
  TrainPlan plan_;
  const data::Dataset& train_;
  const data::Dataset* probe_;
};

struct AttackResult {
  nets::ModelGraph model;
  TrainTrace trace;
};

// Trains a fresh attacker on the frozen pipeline with the plain l1 loss
// (beta = 0). The bottleneck variant reads AE outputs, the latent variant reads
// raw frontend features.
AttackResult train_attack(nets::RecNetVariant variant, const nets::ModelSet& frozen,
                          const nets::SplitConfig& cfg, const data::Dataset& train,
                          const data::Dataset* probe, const TrainPlan& plan);

// Input to the attacker of the given variant for [0, 255] images.
Tensor4D attack_input(nets::RecNetVariant variant, const nets::ModelSet& models, const Tensor4D& images_255);
Metrics evaluate_attack(const nets::ModelGraph& attacker, nets::RecNetVariant variant,
                        const nets::ModelSet& models, const data::Dataset& eval, std::size_t batch = 64);

std::string to_string(nets::RecNetVariant v);
nets::RecNetVariant variant_from_string(const std::string& s);

}  // namespace fpc::train
