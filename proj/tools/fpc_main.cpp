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

#include <malloc.h>

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "fpc/byte_io.hpp"
#include "fpc/codec.hpp"
#include "fpc/data.hpp"
#include "fpc/error.hpp"
#include "fpc/evaluation.hpp"
#include "fpc/losses.hpp"
#include "fpc/pipeline.hpp"
#include "fpc/training.hpp"

namespace {

using namespace fpc;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Options shared by every command that reads a RunConfig.
struct ConfigOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "RunConfig JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Run seed (data, init and shuffling)");
    cmd->add_option("-o,--out", out, "Workspace directory");
    cmd->add_option("--set", sets, "Override a config field, e.g. --set plan.ae_epochs=10")->allow_extra_args(false);
  }

  run::RunConfig resolve() const {
    json j = config.empty() ? run::to_json(run::RunConfig{}) : run::to_json(run::load_config(config));
    for (const std::string& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
      std::string ptr = "/" + s.substr(0, eq);
      for (char& ch : ptr)
        if (ch == '.') ch = '/';
      const std::string text = s.substr(eq + 1);
      json value = json::parse(text, nullptr, false);
      if (value.is_discarded()) value = text;
      j[json::json_pointer(ptr)] = value;
    }
    if (seed) j["seed"] = *seed;
    if (!out.empty()) j["out_dir"] = out;
    return run::config_from_json(j);
  }
};

void print_trace(const train::TrainTrace& t) {
  for (const auto& r : t.epochs)
    std::printf("%-18s epoch %3zu  l_obj %9.5f  l_rec %9.5f  l_tot %9.5f  acc %6.4f  psnr %7.3f  edge %7.3f\n",
                r.phase.c_str(), r.epoch, r.l_obj, r.l_rec, r.l_tot, r.acc, r.probe_psnr, r.probe_edge_psnr);
}

void print_bds(const std::vector<eval::NamedBD>& bds) {
  for (const auto& b : bds) {
    if (b.result.y_axis == "log10_bpp")
      std::printf("%-34s %+.6f%%  (overlap %.6g .. %.6g)\n", b.name.c_str(), b.result.bd_rate_percent,
                  b.result.overlap_lo, b.result.overlap_hi);
    else
      std::printf("%-34s %+.6f  (overlap %.6g .. %.6g)\n", b.name.c_str(), b.result.bd_metric_delta,
                  b.result.overlap_lo, b.result.overlap_hi);
  }
}

const eval::RDCurve& pick_curve(const std::vector<eval::RDCurve>& curves, const std::string& label,
                                const std::string& file) {
  if (curves.empty()) throw DecodeError(file + " holds no curves");
  if (label.empty()) {
    if (curves.size() != 1) throw UsageError(file + " holds several curves; pass a label");
    return curves.front();
  }
  for (const auto& c : curves)
    if (c.label == label) return c;
  throw UsageError("no curve labelled '" + label + "' in " + file);
}

void load_models(const run::RunConfig& cfg, nets::ModelSet& m) {
  const run::Workspace ws(cfg.out_dir);
  for (auto [name, g] : std::initializer_list<std::pair<const char*, nets::ModelGraph*>>{
           {"frontend", &m.frontend}, {"ae", &m.ae}, {"ad", &m.ad}, {"backend", &m.backend}, {"recnet", &m.recnet}})
    g->params().load(read_file(ws.model_path(name)));
  for (nets::ModelGraph* g : {&m.frontend, &m.ae, &m.ad, &m.backend, &m.recnet}) g->set_frozen(true);
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Privacy-aware split-feature coding toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  ConfigOptions opts;
  auto with_config = [&](const char* name, const char* help) {
    CLI::App* c = app.add_subcommand(name, help);
    opts.attach(c);
    return c;
  };

  CLI::App* gen = with_config("gen-data", "Render the synthetic train/eval/probe sets into the workspace");
  CLI::App* pre = with_config("pretrain", "Train the task front-end and back-end, then freeze them");
  CLI::App* tae = with_config("train-ae", "Train the autoencoder on the task loss");
  CLI::App* trn = with_config("train-recnet", "Train RecNet on the reconstruction loss");
  CLI::App* tadv = with_config("train-adversarial", "Run the adversarial phase");
  CLI::App* tatk = with_config("train-attack", "Train a post-hoc inversion attacker on the frozen pipeline");
  std::string variant = "both";
  tatk->add_option("--variant", variant, "bottleneck, latent or both")
      ->check(CLI::IsMember({"bottleneck", "latent", "both"}));

  CLI::App* sweep = with_config("sweep", "Rate-accuracy-privacy sweeps for the proposed and anchor pipelines");
  bool clip_study = false;
  sweep->add_flag("--clip-study", clip_study, "Also sweep the configured clipping ranges");
  CLI::App* report = with_config("report", "BD comparisons, JSON summary and SVG charts from the sweep");
  CLI::App* runall = with_config("run", "Every stage in order: gen-data through report");

  CLI::App* enc = app.add_subcommand("encode", "Code a .fpt feature tensor into a .fpfc bitstream");
  std::string in_path, out_path, codec_name = "dct";
  std::vector<double> clip{-3.0, 3.0};
  int qp = 38;
  std::vector<std::size_t> grid;
  enc->add_option("--in", in_path, "Input .fpt tensor")->required()->check(CLI::ExistingFile);
  enc->add_option("--out", out_path, "Output .fpfc bitstream")->required();
  enc->add_option("--clip", clip, "Clipping range lo hi")->expected(2);
  enc->add_option("--qp", qp, "Quantization parameter")->check(CLI::Range(0, codec::kMaxQp));
  enc->add_option("--codec", codec_name, "dct or null")->check(CLI::IsMember({"dct", "null", "0", "1"}));
  enc->add_option("--grid", grid, "Tile grid rows cols (default: most square)")->expected(2);

  CLI::App* dec = app.add_subcommand("decode", "Decode a .fpfc bitstream back to a .fpt tensor");
  std::string pgm_path;
  dec->add_option("--in", in_path, "Input .fpfc bitstream")->required()->check(CLI::ExistingFile);
  dec->add_option("--out", out_path, "Output .fpt tensor")->required();
  dec->add_option("--pgm", pgm_path, "Also dump the decoded mosaic as PGM");

  CLI::App* inf = with_config("infer", "Run trained models on images from a .fpt file");
  std::string features_path, recon_path, recon_variant = "bottleneck";
  inf->add_option("--images", in_path, "N x C x H x W images in [0, 255]")->required()->check(CLI::ExistingFile);
  inf->add_option("--features", features_path, "Write the bottleneck features here");
  inf->add_option("--reconstruct", recon_path, "Write attacker reconstructions ([0, 255]) here");
  inf->add_option("--attacker", recon_variant, "Attacker used by --reconstruct")
      ->check(CLI::IsMember({"bottleneck", "latent"}));

  CLI::App* bd = app.add_subcommand("bd", "Bjontegaard deltas between two RD CSV files");
  std::string anchor_csv, test_csv, anchor_label, test_label, metric = "accuracy", mode = "rate", x_metric = "accuracy";
  bd->add_option("--anchor", anchor_csv, "Anchor RD CSV")->required()->check(CLI::ExistingFile);
  bd->add_option("--test", test_csv, "Test RD CSV")->required()->check(CLI::ExistingFile);
  bd->add_option("--anchor-label", anchor_label, "Curve label inside the anchor file");
  bd->add_option("--test-label", test_label, "Curve label inside the test file");
  bd->add_option("--mode", mode, "rate: BD-rate at equal metric; metric: BD-metric at equal rate; "
                                 "quality: metric difference at equal --x")
      ->check(CLI::IsMember({"rate", "metric", "quality"}));
  bd->add_option("--metric", metric, "accuracy, attack_psnr or attack_edge_psnr");
  bd->add_option("--x", x_metric, "Abscissa for --mode quality");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen->parsed()) {
    const run::RunConfig cfg = opts.resolve();
    run::stage_gen_data(cfg);
    std::printf("wrote %zu/%zu/%zu images under %s\n", cfg.data.train, cfg.data.eval, cfg.data.probe,
                run::Workspace(cfg.out_dir).root().string().c_str());
  } else if (pre->parsed()) {
    print_trace(run::stage_pretrain(opts.resolve()));
  } else if (tae->parsed()) {
    print_trace(run::stage_train_ae(opts.resolve()));
  } else if (trn->parsed()) {
    print_trace(run::stage_train_recnet(opts.resolve()));
  } else if (tadv->parsed()) {
    print_trace(run::stage_train_adversarial(opts.resolve()));
  } else if (tatk->parsed()) {
    const run::RunConfig cfg = opts.resolve();
    for (const char* v : {"bottleneck", "latent"})
      if (variant == "both" || variant == v) print_trace(run::stage_train_attack(cfg, train::variant_from_string(v)));
  } else if (sweep->parsed()) {
    const auto curves = run::stage_sweep(opts.resolve(), clip_study);
    for (const auto& c : curves)
      for (const auto& p : c.points)
        std::printf("%-9s qp %2d  bpp %.5f  acc %.4f  attack_psnr %.3f  attack_edge_psnr %.3f\n", c.label.c_str(),
                    p.qp, p.bpp, p.accuracy, p.attack_psnr, p.attack_edge_psnr);
  } else if (report->parsed()) {
    print_bds(run::stage_report(opts.resolve()).bds);
  } else if (runall->parsed()) {
    const run::RunConfig cfg = opts.resolve();
    run::stage_gen_data(cfg);
    print_trace(run::stage_pretrain(cfg));
    print_trace(run::stage_train_ae(cfg));
    print_trace(run::stage_train_recnet(cfg));
    print_trace(run::stage_train_adversarial(cfg));
    print_trace(run::stage_train_attack(cfg, nets::RecNetVariant::Bottleneck));
    print_trace(run::stage_train_attack(cfg, nets::RecNetVariant::Latent));
    run::stage_sweep(cfg, true);
    print_bds(run::stage_report(cfg).bds);
  } else if (enc->parsed()) {
    const Tensor4D t = data::read_fpt(in_path);
    const codec::ClipRange r{clip[0], clip[1]};
    const codec::TileGrid g = grid.empty() ? codec::TileGrid::for_channels(t.shape().c) : codec::TileGrid{grid[0], grid[1]};
    const codec::FeatureBitstream bs = codec::encode_features(t, r, g, codec::codec_from_string(codec_name), qp);
    write_file(out_path, bs.serialize());
    std::printf("%zu payload bytes, %.6f bits per feature sample\n", bs.payload.size(),
                static_cast<double>(bs.payload_bits()) / static_cast<double>(t.shape().n * t.shape().sample()));
  } else if (dec->parsed()) {
    const codec::FeatureBitstream bs = codec::FeatureBitstream::parse(read_file(in_path));
    const Tensor4D t = codec::decode_features(bs);
    data::write_fpt(out_path, t);
    if (!pgm_path.empty()) {
      const codec::TileGrid g = bs.header.grid();
      codec::write_pgm(pgm_path, codec::tile(codec::clip_quantize(t, bs.header.clip()), g));
    }
    const Shape s = t.shape();
    std::printf("decoded %zux%zux%zux%zu\n", s.n, s.c, s.h, s.w);
  } else if (inf->parsed()) {
    const run::RunConfig cfg = opts.resolve();
    nets::ModelSet m = run::init_models(cfg);
    load_models(cfg, m);
    const Tensor4D images = data::read_fpt(in_path);
    const Tensor4D z = nets::infer_pipeline(nets::normalize_images(images), {&m.frontend, &m.ae});
    const Tensor4D logits = nets::infer_pipeline(z, {&m.ad, &m.backend});
    const Shape ls = logits.shape();
    for (std::size_t i = 0; i < ls.n; ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < ls.c; ++k)
        if (logits.at(i, k, 0, 0) > logits.at(i, best, 0, 0)) best = k;
      std::printf("%zu %s\n", i, data::to_string(static_cast<data::ShapeClass>(best)).c_str());
    }
    if (!features_path.empty()) data::write_fpt(features_path, z);
    if (!recon_path.empty()) {
      const auto v = train::variant_from_string(recon_variant);
      nets::ModelGraph attacker = nets::build_recnet(cfg.split, v, 0);
      attacker.params().load(read_file(run::Workspace(cfg.out_dir).model_path("attack_" + recon_variant)));
      attacker.set_frozen(true);
      Tensor4D rec = attacker.infer(v == nets::RecNetVariant::Latent ? m.frontend.infer(nets::normalize_images(images)) : z);
      for (Real& x : rec.data()) x = std::clamp<Real>(x * Real(255), Real(0), Real(255));
      data::write_fpt(recon_path, rec);
    }
  } else if (bd->parsed()) {
    const auto a = eval::read_curves_csv(anchor_csv);
    const auto t = eval::read_curves_csv(test_csv);
    const eval::RDCurve& ca = pick_curve(a, anchor_label, anchor_csv);
    const eval::RDCurve& ct = pick_curve(t, test_label, test_csv);
    eval::Metric m;
    eval::Metric xm;
    try {
      m = eval::metric_from_string(metric);
      xm = eval::metric_from_string(x_metric);
    } catch (const ArgumentError& e) {
      throw UsageError(e.what());
    }
    if (mode == "rate") {
      const auto r = eval::bd_rate(ca, ct, m);
      std::printf("BD-rate: %.6f%%\n", r.bd_rate_percent);
    } else if (mode == "metric") {
      const auto r = eval::bd_metric(ca, ct, m);
      std::printf("BD-%s: %+.6f\n", eval::to_string(m).c_str(), r.bd_metric_delta);
    } else {
      const auto r = eval::bd_quality(ca, ct, m, xm);
      std::printf("BD-%s at equal %s: %+.6f\n", eval::to_string(m).c_str(), eval::to_string(xm).c_str(),
                  r.bd_metric_delta);
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  // Serve large tape buffers from the heap rather than fresh mmaps.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  try {
    return dispatch(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fpc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
