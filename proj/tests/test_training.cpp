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

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "fpc/data.hpp"
#include "fpc/error.hpp"
#include "fpc/losses.hpp"
#include "fpc/training.hpp"

namespace fpc::train {
namespace {

using nets::ModelSet;
using nets::SplitConfig;

// Reduced geometry so the protocol tests stay fast.
SplitConfig small_split() {
  SplitConfig cfg;
  cfg.input_h = 32;
  cfg.input_w = 32;
  cfg.frontend_channels = 24;
  cfg.bottleneck_channels = 8;
  return cfg;
}

data::SceneSpec scene_for(const SplitConfig& cfg) {
  data::SceneSpec s;
  s.height = cfg.input_h;
  s.width = cfg.input_w;
  s.num_classes = cfg.num_classes;
  return s;
}

TrainPlan small_plan() {
  TrainPlan p;
  p.pretrain_epochs = 1;
  p.ae_epochs = 1;
  p.recnet_epochs = 1;
  p.adversarial_epochs = 1;
  p.attack_epochs = 1;
  p.batch_size = 16;
  return p;
}

std::map<std::string, std::vector<std::uint8_t>> bytes_of(const ModelSet& m) {
  return {{"frontend", m.frontend.params().serialize()},
          {"ae", m.ae.params().serialize()},
          {"ad", m.ad.params().serialize()},
          {"backend", m.backend.params().serialize()},
          {"recnet", m.recnet.params().serialize()}};
}

struct Rig {
  SplitConfig cfg = small_split();
  TrainPlan plan = small_plan();
  data::Dataset train = data::gen_dataset(scene_for(cfg), 64, 0);
  data::Dataset probe = data::gen_dataset(scene_for(cfg), 16, 5000);
  ModelSet models = nets::build_default_models(cfg, 0);
  Optimizers opt = Optimizers::for_plan(plan, train.size());

  Session session() { return Session(models, opt, plan, train, &probe); }
};

TEST(Pretrain, BeatsChanceAndFreezes) {
  SplitConfig cfg;
  TrainPlan plan;
  plan.pretrain_epochs = 2;
  const data::SceneSpec scene = scene_for(cfg);
  const data::Dataset train = data::gen_dataset(scene, 512, 0);
  const data::Dataset held = data::gen_dataset(scene, 256, 900000);
  ModelSet m = nets::build_default_models(cfg, 0);
  Optimizers opt = Optimizers::for_plan(plan, train.size());
  Session s(m, opt, plan, train);
  const TrainTrace t = s.pretrain_task();
  EXPECT_EQ(t.epochs.size(), 2u);
  EXPECT_TRUE(m.frontend.frozen());
  EXPECT_TRUE(m.backend.frozen());
  const Tensor4D logits = nets::infer_pipeline(nets::normalize_images(held.images), {&m.frontend, &m.backend});
  EXPECT_GT(loss::accuracy(logits, held.labels), 1.0 / static_cast<double>(cfg.num_classes));
}

TEST(Pretrain, Deterministic) {
  Rig a, b;
  a.session().pretrain_task();
  b.session().pretrain_task();
  EXPECT_EQ(bytes_of(a.models), bytes_of(b.models));
}

TEST(AePhase, TaskNetsUntouchedAndLossDrops) {
  Rig r;
  r.plan.ae_epochs = 3;
  r.opt = Optimizers::for_plan(r.plan, r.train.size());
  Session s = r.session();
  s.pretrain_task();
  const auto before = bytes_of(r.models);
  const TrainTrace t = s.train_ae_phase();
  const auto after = bytes_of(r.models);
  EXPECT_EQ(before.at("frontend"), after.at("frontend"));
  EXPECT_EQ(before.at("backend"), after.at("backend"));
  EXPECT_EQ(before.at("recnet"), after.at("recnet"));
  EXPECT_NE(before.at("ae"), after.at("ae"));
  ASSERT_EQ(t.epochs.size(), 3u);
  EXPECT_LE(t.epochs.back().l_obj, t.epochs.front().l_obj);
}

TEST(AePhase, RequiresFrozenTaskNets) {
  Rig r;
  EXPECT_THROW(r.session().train_ae_phase(), StateError);
}

TEST(Phases, ZeroEpochsAreIdentity) {
  Rig r;
  r.plan.ae_epochs = 0;
  r.plan.recnet_epochs = 0;
  r.plan.adversarial_epochs = 0;
  Session s = r.session();
  s.pretrain_task();
  const auto before = bytes_of(r.models);
  EXPECT_TRUE(s.train_ae_phase().epochs.empty());
  EXPECT_TRUE(s.train_recnet_phase().epochs.empty());
  EXPECT_TRUE(s.adversarial_phase().epochs.empty());
  EXPECT_EQ(bytes_of(r.models), before);
}

TEST(RecnetPhase, OnlyRecnetChangesAndProbeImproves) {
  Rig r;
  r.plan.recnet_epochs = 3;
  r.opt = Optimizers::for_plan(r.plan, r.train.size());
  Session s = r.session();
  s.pretrain_task();
  s.train_ae_phase();
  const auto before = bytes_of(r.models);
  const TrainTrace t = s.train_recnet_phase();
  const auto after = bytes_of(r.models);
  for (const char* name : {"frontend", "ae", "ad", "backend"}) EXPECT_EQ(before.at(name), after.at(name)) << name;
  EXPECT_NE(before.at("recnet"), after.at("recnet"));
  ASSERT_EQ(t.epochs.size(), 3u);
  EXPECT_GT(t.epochs.back().probe_psnr, t.epochs.front().probe_psnr);
}

// Runs the phases up to the adversarial one.
void prepare(Session& s) {
  s.pretrain_task();
  s.train_ae_phase();
  s.train_recnet_phase();
}

TEST(Adversarial, UpdatePartition) {
  Rig r;
  Session s = r.session();
  prepare(s);
  auto last = bytes_of(r.models);
  std::size_t steps2 = 0, steps4 = 0;
  AdversarialOptions o;
  o.verify_freeze = true;
  o.observer = [&](AdvStage stage, std::size_t) {
    const auto now = bytes_of(r.models);
    for (const char* name : {"frontend", "backend"}) EXPECT_EQ(now.at(name), last.at(name)) << name;
    if (stage == AdvStage::RecnetUpdate) {
      ++steps2;
      EXPECT_NE(now.at("recnet"), last.at("recnet"));
      EXPECT_EQ(now.at("ae"), last.at("ae"));
      EXPECT_EQ(now.at("ad"), last.at("ad"));
    } else {
      ++steps4;
      EXPECT_EQ(now.at("recnet"), last.at("recnet"));
      EXPECT_NE(now.at("ae"), last.at("ae"));
      EXPECT_NE(now.at("ad"), last.at("ad"));
    }
    last = now;
  };
  s.adversarial_epoch(0, o);
  EXPECT_EQ(steps2, steps_per_epoch(r.train.size(), r.plan.batch_size));
  EXPECT_EQ(steps4, steps2);
}

TEST(Adversarial, TaskNetsBitFrozenAcrossPhase) {
  Rig r;
  r.plan.adversarial_epochs = 2;
  r.opt = Optimizers::for_plan(r.plan, r.train.size());
  Session s = r.session();
  prepare(s);
  const auto before = bytes_of(r.models);
  const TrainTrace t = s.adversarial_phase();
  const auto after = bytes_of(r.models);
  EXPECT_EQ(before.at("frontend"), after.at("frontend"));
  EXPECT_EQ(before.at("backend"), after.at("backend"));
  EXPECT_EQ(t.epochs.size(), 2u);
  EXPECT_EQ(t.checkpoints.size(), 5u);
}

// With a single batch per epoch, step 4 cannot feed back into a later step 1,
// so RecNet after the epoch depends on step 2 alone.
TEST(Adversarial, RecnetIndependentOfStepFour) {
  Rig full, no4;
  for (Rig* r : {&full, &no4}) {
    r->train = r->train.subset(0, r->plan.batch_size);
    r->opt = Optimizers::for_plan(r->plan, r->train.size());
  }
  Session a = full.session(), b = no4.session();
  prepare(a);
  prepare(b);
  ASSERT_EQ(bytes_of(full.models), bytes_of(no4.models));
  a.adversarial_epoch(0);
  AdversarialOptions o;
  o.autoencoder_steps = false;
  b.adversarial_epoch(0, o);
  EXPECT_EQ(full.models.recnet.params().serialize(), no4.models.recnet.params().serialize());
  EXPECT_NE(full.models.ae.params().serialize(), no4.models.ae.params().serialize());
}

TEST(Adversarial, ZeroWeightMatchesAeOnlyTraining) {
  for (bool recnet_steps : {false, true}) {
    Rig ae_only, ablation;
    ae_only.plan.ae_epochs = 2;
    ablation.plan.loss.w = 0;
    ablation.plan.adversarial_epochs = 2;
    Session a = ae_only.session(), b = ablation.session();
    a.pretrain_task();
    b.pretrain_task();
    // Both start the AE from the same optimizer state.
    ablation.opt.ae = ae_only.opt.ae;
    ablation.opt.ad = ae_only.opt.ad;
    a.train_ae_phase();
    AdversarialOptions o;
    o.recnet_steps = recnet_steps;
    o.order_stream = kOrderAe;
    b.adversarial_phase(o);
    EXPECT_EQ(ae_only.models.ae.params().serialize(), ablation.models.ae.params().serialize()) << recnet_steps;
    EXPECT_EQ(ae_only.models.ad.params().serialize(), ablation.models.ad.params().serialize()) << recnet_steps;
  }
}

TEST(Adversarial, NonzeroWeightDiverges) {
  Rig ae_only, adv;
  ae_only.plan.ae_epochs = 1;
  Session a = ae_only.session(), b = adv.session();
  a.pretrain_task();
  b.pretrain_task();
  adv.opt.ae = ae_only.opt.ae;
  adv.opt.ad = ae_only.opt.ad;
  a.train_ae_phase();
  AdversarialOptions o;
  o.recnet_steps = false;
  o.order_stream = kOrderAe;
  b.adversarial_phase(o);
  EXPECT_NE(ae_only.models.ae.params().serialize(), adv.models.ae.params().serialize());
}

TEST(FullRun, BitReproducible) {
  auto run = [] {
    Rig r;
    Session s = r.session();
    TrainTrace t = s.pretrain_task();
    t.append(s.train_ae_phase());
    t.append(s.train_recnet_phase());
    t.append(s.adversarial_phase());
    for (auto& m : {&r.models.frontend, &r.models.ae, &r.models.ad, &r.models.backend}) nets::set_frozen(*m, true);
    const AttackResult atk = train_attack(nets::RecNetVariant::Bottleneck, r.models, r.cfg, r.train, &r.probe, r.plan);
    t.append(atk.trace);
    return t.to_csv() + t.to_json();
  };
  const std::string first = run();
  EXPECT_EQ(first, run());
  EXPECT_NE(first.find("adversarial"), std::string::npos);
}

TEST(Trace, CsvLayout) {
  Rig r;
  const TrainTrace t = r.session().pretrain_task();
  const std::string csv = t.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,l_obj,l_rec,l_tot,acc,probe_psnr,probe_edge_psnr,phase");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + t.epochs.size());
}

TEST(Training, DivergenceReportsEpoch) {
  Rig r;
  r.plan.optim.lr0 = 1e30;
  r.plan.optim.lr_floor = 1e30;
  r.opt = Optimizers::for_plan(r.plan, r.train.size());
  r.plan.pretrain_epochs = 3;
  try {
    r.session().pretrain_task();
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
  }
}

TEST(Attack, InputChannelsPerVariant) {
  Rig r;
  for (auto* m : {&r.models.frontend, &r.models.ae, &r.models.ad, &r.models.backend}) nets::set_frozen(*m, true);
  const Tensor4D x = r.train.images.slice_batch(0, 2);
  EXPECT_EQ(attack_input(nets::RecNetVariant::Latent, r.models, x).shape().c, r.cfg.frontend_channels);
  EXPECT_EQ(attack_input(nets::RecNetVariant::Bottleneck, r.models, x).shape().c, r.cfg.bottleneck_channels);
  const AttackResult lat = train_attack(nets::RecNetVariant::Latent, r.models, r.cfg, r.train, nullptr, r.plan);
  EXPECT_EQ(lat.model.in_channels(), r.cfg.frontend_channels);
  const AttackResult bot = train_attack(nets::RecNetVariant::Bottleneck, r.models, r.cfg, r.train, nullptr, r.plan);
  EXPECT_EQ(bot.model.in_channels(), r.cfg.bottleneck_channels);
  const Metrics m = evaluate_attack(bot.model, nets::RecNetVariant::Bottleneck, r.models, r.probe);
  EXPECT_TRUE(std::isfinite(m.psnr));
}

TEST(Attack, RequiresFrozenPipeline) {
  Rig r;
  EXPECT_THROW(train_attack(nets::RecNetVariant::Latent, r.models, r.cfg, r.train, nullptr, r.plan), StateError);
}

TEST(Attack, BetaZeroLossIsPlainL1) {
  data::SceneSpec spec;
  Tensor4D x = data::gen_dataset(spec, 2, 0).images;
  Tensor4D y = data::gen_dataset(spec, 2, 10).images;
  loss::LossConfig plain;
  plain.beta = 0;
  x.zero_grad();
  ad::Tape t1;
  const loss::RecLoss l = loss::rec_loss(t1.param(x, true), t1.constant(y), plain);
  t1.backward(l.total);
  const std::vector<Real> g_rec(x.grad().begin(), x.grad().end());
  x.zero_grad();
  ad::Tape t2;
  const ad::Var l1 = ad::mean_abs(ad::sub(t2.param(x, true), t2.constant(y)));
  t2.backward(l1);
  EXPECT_EQ(l.total.value()[0], l1.value()[0]);
  EXPECT_EQ(g_rec, std::vector<Real>(x.grad().begin(), x.grad().end()));
}

TEST(Optimizers, HorizonSpansPhases) {
  TrainPlan p;
  const Optimizers o = Optimizers::for_plan(p, 2048);
  const auto spe = static_cast<std::int64_t>(steps_per_epoch(2048, p.batch_size));
  EXPECT_EQ(o.frontend.total_steps, spe * static_cast<std::int64_t>(p.pretrain_epochs));
  EXPECT_EQ(o.ae.total_steps, spe * static_cast<std::int64_t>(p.ae_epochs + p.adversarial_epochs));
  EXPECT_EQ(o.recnet.total_steps, spe * static_cast<std::int64_t>(p.recnet_epochs + p.adversarial_epochs));
  EXPECT_EQ(steps_per_epoch(100, 32), 4u);
}

}  // namespace
}  // namespace fpc::train
