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

#include "fpc/pipeline.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "fpc/byte_io.hpp"
#include "fpc/error.hpp"

namespace fpc::run {
namespace {

using nlohmann::json;

constexpr std::uint8_t kOptimVersion = 1;
const char* const kModelNames[] = {"frontend", "ae", "ad", "backend", "recnet"};

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <typename T>
void read_if(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

json clip_json(const codec::ClipRange& r) { return json::array({r.lo, r.hi}); }

codec::ClipRange clip_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError(where + " must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

nets::ModelGraph& model_ref(nets::ModelSet& m, const std::string& name) {
  if (name == "frontend") return m.frontend;
  if (name == "ae") return m.ae;
  if (name == "ad") return m.ad;
  if (name == "backend") return m.backend;
  return m.recnet;
}

OptimState& optim_ref(train::Optimizers& o, const std::string& name) {
  if (name == "frontend") return o.frontend;
  if (name == "ae") return o.ae;
  if (name == "ad") return o.ad;
  if (name == "backend") return o.backend;
  return o.recnet;
}

void load_params(nets::ModelGraph& m, const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw StateError("missing checkpoint " + p.string() + "; run the earlier stages first");
  try {
    m.params().load(read_file(p));
  } catch (const DecodeError& e) {
    throw DecodeError(p.string() + ": " + e.what());
  }
}

Datasets load_datasets(const Workspace& ws) {
  Datasets d;
  d.train = data::load_dataset(ws.data_dir("train"));
  d.eval = data::load_dataset(ws.data_dir("eval"));
  if (std::filesystem::exists(ws.data_dir("probe"))) d.probe = data::load_dataset(ws.data_dir("probe"));
  return d;
}

// Loaded models and optimizers in the state a phase expects on entry.
struct State {
  nets::ModelSet models;
  train::Optimizers optim;
};

State load_state(const RunConfig& cfg, const Workspace& ws, bool fresh_ok) {
  State s{init_models(cfg), init_optimizers(cfg)};
  const bool have = std::filesystem::exists(ws.model_path("frontend"));
  if (!have && !fresh_ok) throw StateError("no checkpoints under " + ws.root().string() + "; run pretrain first");
  if (have) {
    for (const char* n : kModelNames) load_params(model_ref(s.models, n), ws.model_path(n));
    for (const char* n : kModelNames)
      if (std::filesystem::exists(ws.optim_path(n))) optim_ref(s.optim, n) = parse_optim(read_file(ws.optim_path(n)));
    s.models.frontend.set_frozen(true);
    s.models.backend.set_frozen(true);
  }
  return s;
}

void save_state(State& s, const Workspace& ws) {
  for (const char* n : kModelNames) {
    write_file(ws.model_path(n), model_ref(s.models, n).params().serialize());
    write_file(ws.optim_path(n), serialize_optim(optim_ref(s.optim, n)));
  }
}

void save_trace(const Workspace& ws, const std::string& phase, const train::TrainTrace& t) {
  write_text_file(ws.trace_path(phase, "csv"), t.to_csv());
  write_text_file(ws.trace_path(phase, "json"), t.to_json());
}

void freeze_all(nets::ModelSet& m) {
  for (nets::ModelGraph* g : {&m.frontend, &m.ae, &m.ad, &m.backend, &m.recnet}) g->set_frozen(true);
}

nets::ModelGraph load_attacker(const RunConfig& cfg, const Workspace& ws, nets::RecNetVariant v) {
  nets::ModelGraph g = nets::build_recnet(cfg.split, v, 0);
  load_params(g, ws.model_path("attack_" + train::to_string(v)));
  g.set_frozen(true);
  return g;
}

eval::SweepSpec sweep_spec(const RunConfig& cfg, eval::Scheme scheme) {
  eval::SweepSpec s;
  s.scheme = scheme;
  s.label = eval::to_string(scheme);
  s.codec = cfg.codec;
  s.qps = cfg.qps;
  s.clip = scheme == eval::Scheme::Proposed ? cfg.clip : cfg.anchor_clip;
  return s;
}

json metrics_json(const train::Metrics& m) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"psnr", num(m.psnr)}, {"edge_psnr", num(m.edge_psnr)}};
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  scene.seed = s;
  plan.seed = s;
}

void RunConfig::validate() const {
  split.validate();
  scene.validate();
  plan.validate();
  clip.validate();
  anchor_clip.validate();
  for (const auto& r : clip_study) r.validate();
  FPC_CHECK(scene.seed == seed && plan.seed == seed, ConfigError, "scene and plan seeds must follow the run seed");
  FPC_CHECK(scene.height == split.input_h && scene.width == split.input_w && scene.channels == split.input_channels,
            ConfigError, "scene image size must match the network input");
  FPC_CHECK(scene.num_classes == split.num_classes, ConfigError, "scene classes must match the task head");
  FPC_CHECK(data.train >= 1 && data.eval >= 1, ConfigError, "train and eval sets must be non-empty");
  FPC_CHECK(data.eval_first >= data.train && data.probe_first >= data.eval_first + data.eval, ConfigError,
            "data splits overlap: need train < eval_first and eval_first + eval <= probe_first");
  FPC_CHECK(!qps.empty(), ConfigError, "qps must not be empty");
  for (int qp : qps) FPC_CHECK(qp >= 0 && qp <= 51, ConfigError, "qp " + std::to_string(qp) + " outside [0, 51]");
  const auto g = codec::TileGrid::for_channels(split.bottleneck_channels);
  FPC_CHECK(g.rows * g.cols == split.bottleneck_channels, ConfigError, "tile grid does not factorize c_b");
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["split"] = {{"input_h", c.split.input_h},
                {"input_w", c.split.input_w},
                {"input_channels", c.split.input_channels},
                {"frontend_channels", c.split.frontend_channels},
                {"bottleneck_channels", c.split.bottleneck_channels},
                {"downsample_factor", c.split.downsample_factor},
                {"num_classes", c.split.num_classes},
                {"resblock_repeats", c.split.resblock_repeats}};
  j["scene"] = {{"glyph_density", c.scene.glyph_density}};
  j["data"] = {{"train", c.data.train},
               {"eval", c.data.eval},
               {"probe", c.data.probe},
               {"eval_first", c.data.eval_first},
               {"probe_first", c.data.probe_first}};
  j["plan"] = {{"pretrain_epochs", c.plan.pretrain_epochs},
               {"ae_epochs", c.plan.ae_epochs},
               {"recnet_epochs", c.plan.recnet_epochs},
               {"adversarial_epochs", c.plan.adversarial_epochs},
               {"attack_epochs", c.plan.attack_epochs},
               {"batch_size", c.plan.batch_size}};
  j["loss"] = {{"beta", c.plan.loss.beta}, {"w", c.plan.loss.w}};
  j["optim"] = {{"lr0", c.plan.optim.lr0}, {"lr_floor", c.plan.optim.lr_floor}, {"momentum", c.plan.optim.momentum}};
  j["clip"] = clip_json(c.clip);
  j["anchor_clip"] = clip_json(c.anchor_clip);
  j["codec"] = codec::to_string(c.codec);
  j["qps"] = c.qps;
  j["clip_study"] = json::array();
  for (const auto& r : c.clip_study) j["clip_study"].push_back(clip_json(r));
  j["out_dir"] = c.out_dir.generic_string();
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, "config",
                 {"seed", "split", "scene", "data", "plan", "loss", "optim", "clip", "anchor_clip", "codec", "qps",
                  "clip_study", "out_dir"});
  read_if(j, "seed", c.seed, "config");
  if (j.contains("split")) {
    const json& s = j["split"];
    reject_unknown(s, "split",
                   {"input_h", "input_w", "input_channels", "frontend_channels", "bottleneck_channels",
                    "downsample_factor", "num_classes", "resblock_repeats"});
    read_if(s, "input_h", c.split.input_h, "split");
    read_if(s, "input_w", c.split.input_w, "split");
    read_if(s, "input_channels", c.split.input_channels, "split");
    read_if(s, "frontend_channels", c.split.frontend_channels, "split");
    read_if(s, "bottleneck_channels", c.split.bottleneck_channels, "split");
    read_if(s, "downsample_factor", c.split.downsample_factor, "split");
    read_if(s, "num_classes", c.split.num_classes, "split");
    read_if(s, "resblock_repeats", c.split.resblock_repeats, "split");
  }
  if (j.contains("scene")) {
    reject_unknown(j["scene"], "scene", {"glyph_density"});
    read_if(j["scene"], "glyph_density", c.scene.glyph_density, "scene");
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    reject_unknown(d, "data", {"train", "eval", "probe", "eval_first", "probe_first"});
    read_if(d, "train", c.data.train, "data");
    read_if(d, "eval", c.data.eval, "data");
    read_if(d, "probe", c.data.probe, "data");
    read_if(d, "eval_first", c.data.eval_first, "data");
    read_if(d, "probe_first", c.data.probe_first, "data");
  }
  if (j.contains("plan")) {
    const json& p = j["plan"];
    reject_unknown(p, "plan",
                   {"pretrain_epochs", "ae_epochs", "recnet_epochs", "adversarial_epochs", "attack_epochs",
                    "batch_size"});
    read_if(p, "pretrain_epochs", c.plan.pretrain_epochs, "plan");
    read_if(p, "ae_epochs", c.plan.ae_epochs, "plan");
    read_if(p, "recnet_epochs", c.plan.recnet_epochs, "plan");
    read_if(p, "adversarial_epochs", c.plan.adversarial_epochs, "plan");
    read_if(p, "attack_epochs", c.plan.attack_epochs, "plan");
    read_if(p, "batch_size", c.plan.batch_size, "plan");
  }
  if (j.contains("loss")) {
    reject_unknown(j["loss"], "loss", {"beta", "w"});
    read_if(j["loss"], "beta", c.plan.loss.beta, "loss");
    read_if(j["loss"], "w", c.plan.loss.w, "loss");
  }
  if (j.contains("optim")) {
    reject_unknown(j["optim"], "optim", {"lr0", "lr_floor", "momentum"});
    read_if(j["optim"], "lr0", c.plan.optim.lr0, "optim");
    read_if(j["optim"], "lr_floor", c.plan.optim.lr_floor, "optim");
    read_if(j["optim"], "momentum", c.plan.optim.momentum, "optim");
  }
  if (j.contains("clip")) c.clip = clip_from(j["clip"], "clip");
  if (j.contains("anchor_clip")) c.anchor_clip = clip_from(j["anchor_clip"], "anchor_clip");
  if (j.contains("codec")) {
    if (!j["codec"].is_string()) throw ConfigError("codec must be a string");
    try {
      c.codec = codec::codec_from_string(j["codec"].get<std::string>());
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
  }
  read_if(j, "qps", c.qps, "config");
  if (j.contains("clip_study")) {
    if (!j["clip_study"].is_array()) throw ConfigError("clip_study must be a list of [lo, hi]");
    c.clip_study.clear();
    for (const json& r : j["clip_study"]) c.clip_study.push_back(clip_from(r, "clip_study"));
  }
  if (j.contains("out_dir")) {
    std::string d;
    read_if(j, "out_dir", d, "config");
    c.out_dir = d;
  }
  c.scene.height = c.split.input_h;
  c.scene.width = c.split.input_w;
  c.scene.channels = c.split.input_channels;
  c.scene.num_classes = c.split.num_classes;
  c.set_seed(c.seed);
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) { write_text_file(path, dump_config(cfg)); }

std::vector<std::uint8_t> serialize_optim(const OptimState& s) {
  ByteWriter w;
  w.str("FPOS");
  w.u8(kOptimVersion);
  w.f64(s.lr0);
  w.f64(s.lr_floor);
  w.f64(s.momentum);
  w.u64(static_cast<std::uint64_t>(s.step));
  w.u64(static_cast<std::uint64_t>(s.total_steps));
  w.u32(static_cast<std::uint32_t>(s.velocity.size()));
  for (const auto& [name, v] : s.velocity) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.str(name);
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (Real x : v) w.f32(static_cast<float>(x));
  }
  return w.take();
}

OptimState parse_optim(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != "FPOS") throw DecodeError("bad optimizer-state magic");
  if (r.u8() != kOptimVersion) throw DecodeError("unsupported optimizer-state version");
  OptimState s;
  s.lr0 = r.f64();
  s.lr_floor = r.f64();
  s.momentum = r.f64();
  s.step = static_cast<std::int64_t>(r.u64());
  s.total_steps = static_cast<std::int64_t>(r.u64());
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str(r.u16());
    std::vector<Real> v(r.u32());
    for (Real& x : v) x = static_cast<Real>(r.f32());
    s.velocity.emplace(name, std::move(v));
  }
  if (!r.done()) throw DecodeError("trailing bytes after optimizer state");
  try {
    s.validate();
  } catch (const Error& e) {
    throw DecodeError(std::string("invalid optimizer state: ") + e.what());
  }
  return s;
}

Datasets make_datasets(const RunConfig& cfg) {
  return {data::gen_dataset(cfg.scene, cfg.data.train, 0),
          data::gen_dataset(cfg.scene, cfg.data.eval, cfg.data.eval_first),
          cfg.data.probe > 0 ? data::gen_dataset(cfg.scene, cfg.data.probe, cfg.data.probe_first) : data::Dataset{}};
}

nets::ModelSet init_models(const RunConfig& cfg) { return nets::build_default_models(cfg.split, cfg.seed); }

train::Optimizers init_optimizers(const RunConfig& cfg) {
  return train::Optimizers::for_plan(cfg.plan, cfg.data.train);
}

Comparison compare_curves(const eval::RDCurve& anchor, const eval::RDCurve& proposed) {
  Comparison c{proposed, anchor, {}};
  using eval::Metric;
  auto attempt = [&](const std::string& name, auto&& fn) {
    eval::BDResult r;
    try {
      r = fn();
    } catch (const EvaluationError&) {
      r.bd_rate_percent = r.bd_metric_delta = r.overlap_lo = r.overlap_hi =
          std::numeric_limits<double>::quiet_NaN();
    }
    c.bds.push_back({name, r});
  };
  attempt("bd_rate_vs_accuracy", [&] { return eval::bd_rate(anchor, proposed, Metric::Accuracy); });
  attempt("bd_accuracy_vs_rate", [&] { return eval::bd_metric(anchor, proposed, Metric::Accuracy); });
  attempt("bd_attack_psnr_vs_accuracy",
          [&] { return eval::bd_quality(anchor, proposed, Metric::AttackPsnr, Metric::Accuracy); });
  attempt("bd_attack_edge_psnr_vs_accuracy",
          [&] { return eval::bd_quality(anchor, proposed, Metric::AttackEdgePsnr, Metric::Accuracy); });
  attempt("bd_attack_psnr_vs_rate", [&] { return eval::bd_metric(anchor, proposed, Metric::AttackPsnr); });
  return c;
}

PipelineResult run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  const Datasets d = make_datasets(cfg);
  const data::Dataset* probe = d.probe.size() > 0 ? &d.probe : nullptr;
  nets::ModelSet models = init_models(cfg);
  train::Optimizers optim = init_optimizers(cfg);
  train::TrainTrace trace;
  {
    train::Session s(models, optim, cfg.plan, d.train, probe);
    trace.append(s.pretrain_task());
    trace.append(s.train_ae_phase());
    trace.append(s.train_recnet_phase());
    trace.append(s.adversarial_phase());
  }
  freeze_all(models);
  train::AttackResult ab = train::train_attack(nets::RecNetVariant::Bottleneck, models, cfg.split, d.train, probe, cfg.plan);
  train::AttackResult al = train::train_attack(nets::RecNetVariant::Latent, models, cfg.split, d.train, probe, cfg.plan);
  trace.append(ab.trace);
  trace.append(al.trace);
  AttackReport rep{train::evaluate_attack(ab.model, nets::RecNetVariant::Bottleneck, models, d.eval),
                   train::evaluate_attack(al.model, nets::RecNetVariant::Latent, models, d.eval)};
  const eval::RDCurve proposed = eval::sweep_rd(models, ab.model, sweep_spec(cfg, eval::Scheme::Proposed), d.eval);
  const eval::RDCurve anchor = eval::sweep_rd(models, al.model, sweep_spec(cfg, eval::Scheme::Anchor), d.eval);
  return {std::move(models), std::move(ab.model), std::move(al.model), std::move(trace), rep,
          compare_curves(anchor, proposed)};
}

void stage_gen_data(const RunConfig& cfg) {
  cfg.validate();
  const Workspace ws(cfg.out_dir);
  const Datasets d = make_datasets(cfg);
  data::save_dataset(ws.data_dir("train"), d.train);
  data::save_dataset(ws.data_dir("eval"), d.eval);
  if (d.probe.size() > 0) data::save_dataset(ws.data_dir("probe"), d.probe);
  save_config(ws.root() / "config.json", cfg);
}

namespace {

template <typename Fn>
train::TrainTrace training_stage(const RunConfig& cfg, const std::string& phase, bool fresh_ok, Fn&& fn) {
  cfg.validate();
  const Workspace ws(cfg.out_dir);
  const Datasets d = load_datasets(ws);
  FPC_CHECK(d.train.size() == cfg.data.train, StateError,
            "workspace training set has " + std::to_string(d.train.size()) + " images, config expects " +
                std::to_string(cfg.data.train));
  State s = load_state(cfg, ws, fresh_ok);
  train::Session session(s.models, s.optim, cfg.plan, d.train, d.probe.size() > 0 ? &d.probe : nullptr);
  train::TrainTrace t = fn(session);
  save_state(s, ws);
  save_trace(ws, phase, t);
  return t;
}

}  // namespace

train::TrainTrace stage_pretrain(const RunConfig& cfg) {
  return training_stage(cfg, "pretrain", true, [](train::Session& s) { return s.pretrain_task(); });
}

train::TrainTrace stage_train_ae(const RunConfig& cfg) {
  return training_stage(cfg, "ae", false, [](train::Session& s) { return s.train_ae_phase(); });
}

train::TrainTrace stage_train_recnet(const RunConfig& cfg) {
  return training_stage(cfg, "recnet", false, [](train::Session& s) { return s.train_recnet_phase(); });
}

train::TrainTrace stage_train_adversarial(const RunConfig& cfg) {
  return training_stage(cfg, "adversarial", false, [](train::Session& s) { return s.adversarial_phase(); });
}

train::TrainTrace stage_train_attack(const RunConfig& cfg, nets::RecNetVariant variant) {
  cfg.validate();
  const Workspace ws(cfg.out_dir);
  const Datasets d = load_datasets(ws);
  State s = load_state(cfg, ws, false);
  freeze_all(s.models);
  train::AttackResult a =
      train::train_attack(variant, s.models, cfg.split, d.train, d.probe.size() > 0 ? &d.probe : nullptr, cfg.plan);
  const std::string name = "attack_" + train::to_string(variant);
  write_file(ws.model_path(name), a.model.params().serialize());
  save_trace(ws, name, a.trace);
  const train::Metrics m = train::evaluate_attack(a.model, variant, s.models, d.eval);
  write_text_file(ws.results_dir() / (name + ".json"), metrics_json(m).dump(2) + "\n");
  return a.trace;
}

std::vector<eval::RDCurve> stage_sweep(const RunConfig& cfg, bool with_clip_study) {
  cfg.validate();
  const Workspace ws(cfg.out_dir);
  const Datasets d = load_datasets(ws);
  State s = load_state(cfg, ws, false);
  freeze_all(s.models);
  const nets::ModelGraph ab = load_attacker(cfg, ws, nets::RecNetVariant::Bottleneck);
  const nets::ModelGraph al = load_attacker(cfg, ws, nets::RecNetVariant::Latent);
  std::vector<eval::RDCurve> curves{eval::sweep_rd(s.models, ab, sweep_spec(cfg, eval::Scheme::Proposed), d.eval),
                                    eval::sweep_rd(s.models, al, sweep_spec(cfg, eval::Scheme::Anchor), d.eval)};
  eval::write_curves_csv(ws.results_dir() / "rd.csv", curves);
  if (with_clip_study) {
    eval::SweepSpec base = sweep_spec(cfg, eval::Scheme::Proposed);
    base.label = "clip";
    const eval::ClipStudy cs = eval::clip_study(s.models, ab, cfg.clip_study, base, d.eval);
    eval::write_curves_csv(ws.results_dir() / "clip_study.csv", cs.curves);
    write_text_file(ws.results_dir() / "clip_study.json", eval::summary_json(cs.curves, cs.bd_vs_first));
  }
  return curves;
}

Comparison stage_report(const RunConfig& cfg) {
  cfg.validate();
  const Workspace ws(cfg.out_dir);
  const std::vector<eval::RDCurve> curves = eval::read_curves_csv(ws.results_dir() / "rd.csv");
  const eval::RDCurve* proposed = nullptr;
  const eval::RDCurve* anchor = nullptr;
  for (const auto& c : curves) {
    if (c.label == "proposed") proposed = &c;
    if (c.label == "anchor") anchor = &c;
  }
  if (proposed == nullptr || anchor == nullptr) throw StateError("rd.csv needs 'proposed' and 'anchor' curves");
  Comparison cmp = compare_curves(*anchor, *proposed);
  eval::export_results(curves, cmp.bds, ws.results_dir());
  json summary = json::parse(read_text_file(ws.results_dir() / "summary.json"));
  for (auto v : {nets::RecNetVariant::Bottleneck, nets::RecNetVariant::Latent}) {
    const auto p = ws.results_dir() / ("attack_" + train::to_string(v) + ".json");
    if (std::filesystem::exists(p)) summary["attack"][train::to_string(v)] = json::parse(read_text_file(p));
  }
  write_text_file(ws.results_dir() / "summary.json", summary.dump(2) + "\n");
  return cmp;
}

json attack_report_json(const AttackReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"bottleneck", metrics_json(r.bottleneck)},
          {"latent", metrics_json(r.latent)},
          {"psnr_gap", num(r.psnr_gap())},
          {"edge_psnr_gap", num(r.edge_psnr_gap())}};
}

}  // namespace fpc::run
