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

#include "fpc/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fpc/byte_io.hpp"
#include "fpc/error.hpp"
#include "fpc/rng.hpp"

namespace fpc::train {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using nets::ForwardMode;
using nets::ModelGraph;

struct Batch {
  Tensor4D x;      // normalized
  Tensor4D x255;   // original scale
  std::vector<std::int32_t> labels;
};

template <typename Fn>
void for_each_batch(const data::Dataset& ds, std::size_t batch_size, std::uint64_t order_seed, Fn&& fn) {
  const std::vector<std::size_t> order = shuffled_indices(ds.size(), order_seed);
  std::size_t b = 0;
  for (std::size_t first = 0; first < order.size(); first += batch_size, ++b) {
    const std::size_t count = std::min(batch_size, order.size() - first);
    const std::span<const std::size_t> idx(order.data() + first, count);
    Batch batch;
    batch.x255 = gather_batch(ds.images, idx);
    batch.x = nets::normalize_images(batch.x255);
    batch.labels.reserve(count);
    for (std::size_t i : idx) batch.labels.push_back(ds.labels[i]);
    fn(batch, b);
  }
}

void check_finite(double v, const std::string& phase, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(v))
    throw TrainingError("non-finite loss in " + phase + " at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(batch));
}

std::string fingerprint(const ModelGraph& m) { return hex64(m.params().fingerprint()); }

struct Running {
  double l_obj = 0, l_rec = 0, l_tot = 0;
  std::size_t n = 0;
  void add(double obj, double rec, double tot, std::size_t count) {
    l_obj += obj * static_cast<double>(count);
    l_rec += rec * static_cast<double>(count);
    l_tot += tot * static_cast<double>(count);
    n += count;
  }
  void finish(EpochRecord& r) const {
    const double d = n == 0 ? kNaN : static_cast<double>(n);
    r.l_obj = l_obj / d;
    r.l_rec = l_rec / d;
    r.l_tot = l_tot / d;
  }
};

std::uint64_t order_seed(const TrainPlan& plan, std::uint64_t stream, std::size_t epoch) {
  return Rng::derive(plan.seed, stream, epoch);
}

}  // namespace

void TrainPlan::validate() const {
  FPC_CHECK(batch_size >= 1, ConfigError, "batch_size must be >= 1");
  loss.validate();
  OptimState o = optim;
  o.total_steps = std::max<std::int64_t>(o.total_steps, 1);
  o.validate();
}

TrainPlan TrainPlan::scaled(double factor) {
  FPC_CHECK(factor > 0 && std::isfinite(factor), ConfigError, "schedule factor must be positive");
  auto epochs = [&](double full) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(full * factor)));
  };
  TrainPlan p;
  p.ae_epochs = epochs(50);
  p.recnet_epochs = epochs(20);
  p.adversarial_epochs = epochs(40);
  return p;
}

void TrainTrace::append(const TrainTrace& other) {
  epochs.insert(epochs.end(), other.epochs.begin(), other.epochs.end());
  checkpoints.insert(checkpoints.end(), other.checkpoints.begin(), other.checkpoints.end());
}

std::string TrainTrace::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,l_obj,l_rec,l_tot,acc,probe_psnr,probe_edge_psnr,phase\n";
  for (const EpochRecord& r : epochs)
    out << r.epoch << ',' << r.l_obj << ',' << r.l_rec << ',' << r.l_tot << ',' << r.acc << ','
        << r.probe_psnr << ',' << r.probe_edge_psnr << ',' << r.phase << '\n';
  return out.str();
}

std::string TrainTrace::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["epochs"] = nlohmann::json::array();
  for (const EpochRecord& r : epochs)
    j["epochs"].push_back({{"phase", r.phase},
                           {"epoch", r.epoch},
                           {"l_obj", num(r.l_obj)},
                           {"l_rec", num(r.l_rec)},
                           {"l_tot", num(r.l_tot)},
                           {"acc", num(r.acc)},
                           {"probe_psnr", num(r.probe_psnr)},
                           {"probe_edge_psnr", num(r.probe_edge_psnr)}});
  j["checkpoints"] = nlohmann::json::array();
  for (const CheckpointHash& c : checkpoints)
    j["checkpoints"].push_back({{"phase", c.phase}, {"model", c.model}, {"hash", c.hash}});
  return j.dump(2);
}

std::size_t steps_per_epoch(std::size_t train_size, std::size_t batch_size) {
  FPC_CHECK(batch_size >= 1, ConfigError, "batch_size must be >= 1");
  return (train_size + batch_size - 1) / batch_size;
}

Optimizers Optimizers::for_plan(const TrainPlan& plan, std::size_t train_size) {
  const auto spe = static_cast<std::int64_t>(steps_per_epoch(train_size, plan.batch_size));
  auto make = [&](std::size_t epochs) {
    OptimState o = plan.optim;
    o.step = 0;
    o.velocity.clear();
    o.total_steps = std::max<std::int64_t>(1, spe * static_cast<std::int64_t>(epochs));
    o.validate();
    return o;
  };
  Optimizers opt;
  opt.frontend = make(plan.pretrain_epochs);
  opt.backend = make(plan.pretrain_epochs);
  opt.ae = make(plan.ae_epochs + plan.adversarial_epochs);
  opt.ad = make(plan.ae_epochs + plan.adversarial_epochs);
  opt.recnet = make(plan.recnet_epochs + plan.adversarial_epochs);
  return opt;
}

Metrics reconstruction_metrics(const Tensor4D& recon_unit, const Tensor4D& images_255) {
  FPC_CHECK(recon_unit.shape() == images_255.shape(), ShapeError,
            "reconstruction " + recon_unit.shape().str() + " vs images " + images_255.shape().str());
  Tensor4D r(recon_unit.shape());
  for (std::size_t i = 0; i < r.numel(); ++i)
    r[i] = static_cast<Real>(std::clamp(static_cast<double>(recon_unit[i]) * 255.0, 0.0, 255.0));
  return {loss::psnr(images_255, r, 255.0), loss::edge_psnr(images_255, r)};
}

Session::Session(nets::ModelSet& models, Optimizers& optimizers, const TrainPlan& plan,
                 const data::Dataset& train, const data::Dataset* probe)
    : m_(models), opt_(optimizers), plan_(plan), train_(train), probe_(probe) {
  plan_.validate();
  FPC_CHECK(train_.size() >= 1, ArgumentError, "training set is empty");
}

double Session::probe_accuracy(bool full_chain) const {
  if (probe_ == nullptr || probe_->size() == 0) return kNaN;
  const Tensor4D x = nets::normalize_images(probe_->images);
  const Tensor4D logits =
      full_chain ? nets::infer_pipeline(x, {&m_.frontend, &m_.ae, &m_.ad, &m_.backend})
                 : nets::infer_pipeline(x, {&m_.frontend, &m_.backend});
  return loss::accuracy(logits, probe_->labels);
}

Metrics Session::probe_attack() const {
  if (probe_ == nullptr || probe_->size() == 0) return {kNaN, kNaN};
  const Tensor4D x = nets::normalize_images(probe_->images);
  const Tensor4D rec = nets::infer_pipeline(x, {&m_.frontend, &m_.ae, &m_.recnet});
  return reconstruction_metrics(rec, probe_->images);
}

void Session::require_task_frozen(const char* phase) const {
  if (!m_.frontend.frozen() || !m_.backend.frozen())
    throw StateError(std::string(phase) + " needs frozen task networks; run pretraining first");
}

void Session::record_hashes(TrainTrace& trace, const std::string& phase) const {
  const std::pair<const char*, const ModelGraph*> all[] = {
      {"frontend", &m_.frontend}, {"ae", &m_.ae}, {"ad", &m_.ad}, {"backend", &m_.backend}, {"recnet", &m_.recnet}};
  for (const auto& [name, model] : all) trace.checkpoints.push_back({phase, name, fingerprint(*model)});
}

TrainTrace Session::pretrain_task() {
  const std::string phase = "pretrain";
  TrainTrace trace;
  m_.frontend.set_frozen(false);
  m_.backend.set_frozen(false);
  for (std::size_t e = 0; e < plan_.pretrain_epochs; ++e) {
    Running run;
    for_each_batch(train_, plan_.batch_size, order_seed(plan_, kOrderPretrain, e), [&](const Batch& b, std::size_t bi) {
      m_.frontend.params().zero_grad();
      m_.backend.params().zero_grad();
      ad::Tape tape;
      const ad::Var logits = nets::forward_pipeline(tape, tape.constant(b.x), {&m_.frontend, &m_.backend},
                                                    ForwardMode::Train);
      const ad::Var l = loss::task_loss(logits, b.labels);
      const double v = l.value()[0];
      check_finite(v, phase, e, bi);
      tape.backward(l);
      sgd_step(m_.frontend.params(), opt_.frontend);
      sgd_step(m_.backend.params(), opt_.backend);
      run.add(v, kNaN, v, b.labels.size());
    });
    EpochRecord r{phase, e};
    run.finish(r);
    r.acc = probe_accuracy(false);
    r.probe_psnr = r.probe_edge_psnr = kNaN;
    trace.epochs.push_back(r);
  }
  m_.frontend.set_frozen(true);
  m_.backend.set_frozen(true);
  record_hashes(trace, phase);
  return trace;
}

TrainTrace Session::train_ae_phase() {
  const std::string phase = "ae";
  require_task_frozen("AE training");
  TrainTrace trace;
  m_.ae.set_frozen(false);
  m_.ad.set_frozen(false);
  for (std::size_t e = 0; e < plan_.ae_epochs; ++e) {
    Running run;
    for_each_batch(train_, plan_.batch_size, order_seed(plan_, kOrderAe, e), [&](const Batch& b, std::size_t bi) {
      m_.ae.params().zero_grad();
      m_.ad.params().zero_grad();
      ad::Tape tape;
      const ad::Var logits = nets::forward_pipeline(
          tape, tape.constant(b.x), {&m_.frontend, &m_.ae, &m_.ad, &m_.backend}, ForwardMode::Train);
      const ad::Var l = loss::task_loss(logits, b.labels);
      const double v = l.value()[0];
      check_finite(v, phase, e, bi);
      tape.backward(l);
      sgd_step(m_.ae.params(), opt_.ae);
      sgd_step(m_.ad.params(), opt_.ad);
      run.add(v, kNaN, v, b.labels.size());
    });
    EpochRecord r{phase, e};
    run.finish(r);
    r.acc = probe_accuracy(true);
    r.probe_psnr = r.probe_edge_psnr = kNaN;
    trace.epochs.push_back(r);
  }
  record_hashes(trace, phase);
  return trace;
}

TrainTrace Session::train_recnet_phase() {
  const std::string phase = "recnet";
  require_task_frozen("RecNet training");
  TrainTrace trace;
  m_.ae.set_frozen(true);
  m_.ad.set_frozen(true);
  m_.recnet.set_frozen(false);
  for (std::size_t e = 0; e < plan_.recnet_epochs; ++e) {
    Running run;
    for_each_batch(train_, plan_.batch_size, order_seed(plan_, kOrderRecnet, e), [&](const Batch& b, std::size_t bi) {
      m_.recnet.params().zero_grad();
      ad::Tape tape;
      const ad::Var x = tape.constant(b.x);
      const ad::Var rec = nets::forward_pipeline(tape, x, {&m_.frontend, &m_.ae, &m_.recnet}, ForwardMode::Train);
      const loss::RecLoss l = loss::rec_loss(x, rec, plan_.loss);
      const double v = l.total.value()[0];
      check_finite(v, phase, e, bi);
      tape.backward(l.total);
      sgd_step(m_.recnet.params(), opt_.recnet);
      run.add(kNaN, v, kNaN, b.labels.size());
    });
    EpochRecord r{phase, e};
    run.finish(r);
    r.acc = probe_accuracy(true);
    const Metrics pm = probe_attack();
    r.probe_psnr = pm.psnr;
    r.probe_edge_psnr = pm.edge_psnr;
    trace.epochs.push_back(r);
  }
  m_.ae.set_frozen(false);
  m_.ad.set_frozen(false);
  record_hashes(trace, phase);
  return trace;
}

EpochRecord Session::adversarial_epoch(std::size_t epoch, const AdversarialOptions& opts) {
  const std::string phase = "adversarial";
  require_task_frozen("adversarial training");
  const loss::LossConfig& cfg = plan_.loss;
  const std::uint64_t stream = opts.order_stream.value_or(kOrderAdversarial);
  Running run;

  struct Snapshot {
    std::string frontend, ae, ad, backend, recnet;
  };
  auto snap = [&]() {
    return Snapshot{fingerprint(m_.frontend), fingerprint(m_.ae), fingerprint(m_.ad), fingerprint(m_.backend),
                    fingerprint(m_.recnet)};
  };
  auto guard = [&](const Snapshot& before, const Snapshot& after, bool recnet_may_change, std::size_t bi) {
    const bool ok = before.frontend == after.frontend && before.backend == after.backend &&
                    (recnet_may_change || before.recnet == after.recnet) &&
                    (!recnet_may_change || (before.ae == after.ae && before.ad == after.ad));
    if (!ok)
      throw TrainingError("freeze violation in adversarial epoch " + std::to_string(epoch) + ", batch " +
                          std::to_string(bi) + (recnet_may_change ? " (step 2)" : " (step 4)"));
  };

  for_each_batch(train_, plan_.batch_size, order_seed(plan_, stream, epoch), [&](const Batch& b, std::size_t bi) {
    if (opts.recnet_steps) {
      // Steps 1-2: reconstruction loss, RecNet update only.
      const Snapshot before = opts.verify_freeze ? snap() : Snapshot{};
      m_.ae.set_frozen(true);
      m_.ad.set_frozen(true);
      m_.recnet.set_frozen(false);
      m_.recnet.params().zero_grad();
      ad::Tape tape;
      const ad::Var x = tape.constant(b.x);
      const ad::Var rec = nets::forward_pipeline(tape, x, {&m_.frontend, &m_.ae, &m_.recnet}, ForwardMode::Train);
      const loss::RecLoss l = loss::rec_loss(x, rec, cfg);
      check_finite(l.total.value()[0], phase, epoch, bi);
      tape.backward(l.total);
      sgd_step(m_.recnet.params(), opt_.recnet);
      if (opts.verify_freeze) guard(before, snap(), true, bi);
      if (opts.observer) opts.observer(AdvStage::RecnetUpdate, bi);
    }
    if (opts.autoencoder_steps) {
      // Steps 3-4: total loss on the same batch, AE + AD update only. The
      // -w * L_rec gradient reaches AE through the frozen RecNet.
      const Snapshot before = opts.verify_freeze ? snap() : Snapshot{};
      m_.recnet.set_frozen(true);
      m_.ae.set_frozen(false);
      m_.ad.set_frozen(false);
      m_.ae.params().zero_grad();
      m_.ad.params().zero_grad();
      ad::Tape tape;
      const ad::Var x = tape.constant(b.x);
      const ad::Var feat = m_.frontend.forward(tape, x, ForwardMode::Train);
      const ad::Var z = m_.ae.forward(tape, feat, ForwardMode::Train);
      const ad::Var logits =
          m_.backend.forward(tape, m_.ad.forward(tape, z, ForwardMode::Train), ForwardMode::Train);
      const ad::Var l_obj = loss::task_loss(logits, b.labels);
      ad::Var l_tot = l_obj;
      double l_rec = 0;
      if (cfg.w != 0) {
        const loss::RecLoss lr = loss::rec_loss(x, m_.recnet.forward(tape, z, ForwardMode::Train), cfg);
        l_rec = lr.total.value()[0];
        l_tot = loss::total_loss(l_obj, lr.total, cfg);
      } else {
        // Reported only; kept off the tape so w = 0 is plain task training.
        const Tensor4D rec = m_.recnet.infer(z.value());
        l_rec = loss::rec_loss(b.x, rec, cfg).l_rec;
      }
      const double tot = l_tot.value()[0];
      check_finite(tot, phase, epoch, bi);
      tape.backward(l_tot);
      sgd_step(m_.ae.params(), opt_.ae);
      sgd_step(m_.ad.params(), opt_.ad);
      run.add(l_obj.value()[0], l_rec, tot, b.labels.size());
      if (opts.verify_freeze) guard(before, snap(), false, bi);
      if (opts.observer) opts.observer(AdvStage::AutoencoderUpdate, bi);
    }
  });
  m_.recnet.set_frozen(false);
  m_.ae.set_frozen(false);
  m_.ad.set_frozen(false);

  EpochRecord r{phase, epoch};
  run.finish(r);
  r.acc = probe_accuracy(true);
  const Metrics pm = probe_attack();
  r.probe_psnr = pm.psnr;
  r.probe_edge_psnr = pm.edge_psnr;
  return r;
}

TrainTrace Session::adversarial_phase(const AdversarialOptions& opts) {
  TrainTrace trace;
  for (std::size_t e = 0; e < plan_.adversarial_epochs; ++e) trace.epochs.push_back(adversarial_epoch(e, opts));
  record_hashes(trace, "adversarial");
  return trace;
}

std::string to_string(nets::RecNetVariant v) {
  return v == nets::RecNetVariant::Bottleneck ? "bottleneck" : "latent";
}

nets::RecNetVariant variant_from_string(const std::string& s) {
  if (s == "bottleneck") return nets::RecNetVariant::Bottleneck;
  if (s == "latent") return nets::RecNetVariant::Latent;
  throw ArgumentError("unknown attack variant '" + s + "' (expected bottleneck or latent)");
}

Tensor4D attack_input(nets::RecNetVariant variant, const nets::ModelSet& models, const Tensor4D& images_255) {
  const Tensor4D x = nets::normalize_images(images_255);
  if (variant == nets::RecNetVariant::Latent) return models.frontend.infer(x);
  return nets::infer_pipeline(x, {&models.frontend, &models.ae});
}

Metrics evaluate_attack(const ModelGraph& attacker, nets::RecNetVariant variant, const nets::ModelSet& models,
                        const data::Dataset& eval, std::size_t batch) {
  FPC_CHECK(eval.size() >= 1 && batch >= 1, ArgumentError, "attack evaluation needs data");
  Tensor4D rec(eval.images.shape());
  const std::size_t per = eval.images.shape().sample();
  for (std::size_t first = 0; first < eval.size(); first += batch) {
    const std::size_t count = std::min(batch, eval.size() - first);
    const Tensor4D out = attacker.infer(attack_input(variant, models, eval.images.slice_batch(first, count)));
    std::copy(out.data().begin(), out.data().end(), rec.data().begin() + static_cast<std::ptrdiff_t>(first * per));
  }
  return reconstruction_metrics(rec, eval.images);
}

AttackResult train_attack(nets::RecNetVariant variant, const nets::ModelSet& frozen, const nets::SplitConfig& cfg,
                          const data::Dataset& train, const data::Dataset* probe, const TrainPlan& plan) {
  plan.validate();
  FPC_CHECK(frozen.frontend.frozen() && frozen.ae.frozen() && frozen.ad.frozen() && frozen.backend.frozen(),
            StateError, "attack training needs a fully frozen pipeline");
  const std::string phase = "attack_" + to_string(variant);
  const auto v = static_cast<std::uint64_t>(variant);
  AttackResult res{nets::build_recnet(cfg, variant, Rng::derive(plan.seed, kOrderAttack, v)), {}};
  ModelGraph& net = res.model;
  loss::LossConfig lc = plan.loss;
  lc.beta = 0;  // plain l1 attack loss
  OptimState opt = plan.optim;
  opt.step = 0;
  opt.velocity.clear();
  opt.total_steps = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(steps_per_epoch(train.size(), plan.batch_size) * plan.attack_epochs));
  opt.validate();

  for (std::size_t e = 0; e < plan.attack_epochs; ++e) {
    Running run;
    for_each_batch(train, plan.batch_size, Rng::derive(plan.seed, kOrderAttack + 16 * (v + 1), e),
                   [&](const Batch& b, std::size_t bi) {
                     net.params().zero_grad();
                     ad::Tape tape;
                     const ad::Var in = tape.constant(attack_input(variant, frozen, b.x255));
                     const ad::Var rec = net.forward(tape, in, ForwardMode::Train);
                     const loss::RecLoss l = loss::rec_loss(tape.constant(b.x), rec, lc);
                     const double val = l.total.value()[0];
                     check_finite(val, phase, e, bi);
                     tape.backward(l.total);
                     sgd_step(net.params(), opt);
                     run.add(kNaN, val, kNaN, b.labels.size());
                   });
    EpochRecord r{phase, e};
    run.finish(r);
    r.acc = kNaN;
    if (probe != nullptr && probe->size() > 0) {
      const Metrics pm = evaluate_attack(net, variant, frozen, *probe);
      r.probe_psnr = pm.psnr;
      r.probe_edge_psnr = pm.edge_psnr;
    } else {
      r.probe_psnr = r.probe_edge_psnr = kNaN;
    }
    res.trace.epochs.push_back(r);
  }
  net.set_frozen(true);
  res.trace.checkpoints.push_back({phase, "attacker", fingerprint(net)});
  return res;
}

}  // namespace fpc::train
