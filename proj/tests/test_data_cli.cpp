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

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fpc/byte_io.hpp"
#include "fpc/codec.hpp"
#include "fpc/data.hpp"
#include "fpc/error.hpp"
#include "fpc/losses.hpp"
#include "fpc/pipeline.hpp"
#include "test_util.hpp"

namespace fpc {
namespace {

using test_util::random_tensor;
using test_util::scratch_dir;

struct Proc {
  int code = -1;
  std::string out;
};

Proc run_cli(const std::string& args) {
  const std::string cmd = std::string(FPC_CLI_PATH) + " " + args + " 2>&1";
  Proc p;
  FILE* f = popen(cmd.c_str(), "r");
  if (f == nullptr) return p;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), f) != nullptr) p.out += buf.data();
  const int status = pclose(f);
  p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return p;
}

double sobel_energy(const Tensor4D& img) {
  const auto [gx, gy] = loss::sobel_grad(img, {}, loss::BorderMode::Replicate);
  double e = 0;
  for (std::size_t i = 0; i < gx.numel(); ++i) e += double(gx[i]) * gx[i] + double(gy[i]) * gy[i];
  return e / static_cast<double>(gx.numel());
}

TEST(Data, RenderingIsAPureFunctionOfSeedAndIndex) {
  data::SceneSpec s;
  s.seed = 3;
  const data::Dataset a = data::gen_dataset(s, 12, 40), b = data::gen_dataset(s, 12, 40);
  EXPECT_EQ(a.images.storage(), b.images.storage());
  EXPECT_EQ(a.labels, b.labels);
  const data::Dataset wide = data::gen_dataset(s, 20, 36);
  const data::Dataset tail = wide.subset(4, 12);
  EXPECT_EQ(tail.images.storage(), a.images.storage());
  EXPECT_EQ(tail.labels, a.labels);
  s.seed = 4;
  EXPECT_NE(data::gen_dataset(s, 12, 40).images.storage(), a.images.storage());
  for (Real v : a.images.data()) {
    EXPECT_GE(v, 0);
    EXPECT_LE(v, 255);
  }
}

TEST(Data, LabelsAreBalanced) {
  data::SceneSpec s;
  s.seed = 11;
  std::array<std::size_t, 4> hist{};
  for (std::uint64_t i = 0; i < 4096; ++i) ++hist.at(static_cast<std::size_t>(data::label_for(s, i)));
  for (std::size_t c : hist) EXPECT_NEAR(static_cast<double>(c) / 4096.0, 0.25, 0.05);
}

TEST(Data, NoGlyphsMeansLittleEdgeEnergy) {
  data::SceneSpec with, without;
  without.glyph_density = 0;
  double e_with = 0, e_without = 0;
  for (std::uint64_t i = 0; i < 16; ++i) {
    const std::int32_t label = data::label_for(with, i);
    const double a = sobel_energy(data::render_image(with, i, label));
    const double b = sobel_energy(data::render_image(without, i, label));
    EXPECT_LT(b, a) << "image " << i;
    e_with += a;
    e_without += b;
  }
  EXPECT_LT(e_without, 0.5 * e_with);
}

TEST(Data, FptRoundTripAndErrors) {
  const Tensor4D t = random_tensor({2, 3, 4, 5}, 1, -100, 100);
  const auto bytes = data::encode_fpt(t);
  EXPECT_EQ(bytes.size(), 4 + 16 + 4 * t.numel());
  EXPECT_EQ(data::decode_fpt(bytes).storage(), t.storage());
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(data::decode_fpt(bad), DecodeError);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 3);
  EXPECT_THROW(data::decode_fpt(cut), DecodeError);

  const auto dir = scratch_dir("dataset");
  const data::Dataset ds = data::gen_dataset(data::SceneSpec{}, 8, 0);
  data::save_dataset(dir, ds);
  const data::Dataset back = data::load_dataset(dir);
  EXPECT_EQ(back.images.storage(), ds.images.storage());
  EXPECT_EQ(back.labels, ds.labels);
}

TEST(Config, RoundTripAndUnknownKeys) {
  run::RunConfig cfg;
  cfg.set_seed(17);
  cfg.plan.ae_epochs = 9;
  cfg.qps = {30, 35};
  const std::string text = run::dump_config(cfg);
  const run::RunConfig back = run::config_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(run::dump_config(back), text);
  EXPECT_EQ(back.plan.ae_epochs, 9u);
  EXPECT_EQ(back.seed, 17u);

  nlohmann::json j = run::to_json(cfg);
  j["plan"]["ae_epoch"] = 3;
  EXPECT_THROW(run::config_from_json(j), ConfigError);
  j = run::to_json(cfg);
  j["qps"] = {30, 99};
  EXPECT_THROW(run::config_from_json(j), ConfigError);
}

TEST(Config, OptimStateRoundTrip) {
  OptimState s;
  s.lr0 = 0.02;
  s.lr_floor = 0.002;
  s.step = 7;
  s.total_steps = 40;
  s.velocity["a.weight"] = std::vector<Real>{1.5f, -2.0f, 0.25f};
  s.velocity["b"] = std::vector<Real>{};
  const auto bytes = run::serialize_optim(s);
  const OptimState back = run::parse_optim(bytes);
  EXPECT_EQ(back.lr0, s.lr0);
  EXPECT_EQ(back.lr_floor, s.lr_floor);
  EXPECT_EQ(back.momentum, s.momentum);
  EXPECT_EQ(back.step, s.step);
  EXPECT_EQ(back.total_steps, s.total_steps);
  EXPECT_EQ(back.velocity, s.velocity);
  EXPECT_EQ(run::serialize_optim(back), bytes);
  auto bad = bytes;
  bad[1] = 'Q';
  EXPECT_THROW(run::parse_optim(bad), DecodeError);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("frobnicate").code, 1);
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("gen-data --set plan.nonsense=1").code, 1);
  const auto dir = scratch_dir("cli_codes");
  std::ofstream(dir / "junk.fpfc") << "not a bitstream";
  EXPECT_EQ(run_cli("decode --in " + (dir / "junk.fpfc").string() + " --out " + (dir / "x.fpt").string()).code, 2);
}

TEST(Cli, EncodeDecodeWithinQuantizationBound) {
  const auto dir = scratch_dir("cli_codec");
  const Tensor4D t = random_tensor({1, 16, 8, 8}, 21, -4, 4);
  data::write_fpt(dir / "f.fpt", t);
  const std::string in = (dir / "f.fpt").string();

  Proc p = run_cli("encode --in " + in + " --out " + (dir / "n.fpfc").string() + " --clip -3 3 --codec null");
  ASSERT_EQ(p.code, 0) << p.out;
  p = run_cli("decode --in " + (dir / "n.fpfc").string() + " --out " + (dir / "n.fpt").string());
  ASSERT_EQ(p.code, 0) << p.out;
  const Tensor4D back = data::read_fpt(dir / "n.fpt");
  ASSERT_EQ(back.shape(), t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i)
    EXPECT_LE(std::abs(back[i] - std::clamp<Real>(t[i], -3, 3)), 6.0 / 510.0 + 1e-6) << i;

  // The DCT path must agree bit for bit with the library call.
  p = run_cli("encode --in " + in + " --out " + (dir / "d.fpfc").string() + " --clip -3 3 --qp 38");
  ASSERT_EQ(p.code, 0) << p.out;
  p = run_cli("decode --in " + (dir / "d.fpfc").string() + " --out " + (dir / "d.fpt").string());
  ASSERT_EQ(p.code, 0) << p.out;
  const codec::FeatureBitstream bs =
      codec::encode_features(t, {-3, 3}, codec::TileGrid::for_channels(16), codec::CodecId::DctIntra, 38);
  EXPECT_EQ(read_file(dir / "d.fpfc"), bs.serialize());
  EXPECT_EQ(data::read_fpt(dir / "d.fpt").storage(), codec::decode_features(bs).storage());
}

TEST(Cli, BdOfIdenticalCurvesIsZero) {
  const auto dir = scratch_dir("cli_bd");
  eval::RDCurve c;
  c.label = "proposed";
  for (int i = 0; i < 4; ++i) {
    eval::RDPoint p;
    p.qp = 30 + 2 * i;
    p.bpp = 0.8 / (1 << i);
    p.accuracy = 0.9 - 0.05 * i;
    p.attack_psnr = 14 - 0.5 * i;
    p.attack_edge_psnr = 4 - 0.3 * i;
    c.points.push_back(p);
  }
  eval::write_curves_csv(dir / "a.csv", {c});
  const Proc p = run_cli("bd --anchor " + (dir / "a.csv").string() + " --test " + (dir / "a.csv").string() +
                         " --mode rate --metric accuracy");
  ASSERT_EQ(p.code, 0) << p.out;
  EXPECT_NE(p.out.find("BD-rate: 0.000000%"), std::string::npos) << p.out;
}

run::RunConfig tiny_config(const std::filesystem::path& out) {
  run::RunConfig cfg;
  cfg.split.input_h = cfg.split.input_w = 32;
  cfg.split.frontend_channels = 24;
  cfg.split.bottleneck_channels = 8;
  cfg.scene.height = cfg.scene.width = 32;
  cfg.data.train = 32;
  cfg.data.eval = 8;
  cfg.data.probe = 8;
  cfg.plan.pretrain_epochs = cfg.plan.ae_epochs = cfg.plan.recnet_epochs = 1;
  cfg.plan.adversarial_epochs = cfg.plan.attack_epochs = 1;
  cfg.plan.batch_size = 16;
  cfg.qps = {34, 40};
  cfg.clip_study = {{-3, 3}};
  cfg.out_dir = out;
  cfg.set_seed(5);
  return cfg;
}

TEST(Cli, StagesReproduceInMemoryPipeline) {
  const auto dir = scratch_dir("cli_stages");
  const run::RunConfig cfg = tiny_config(dir / "ws");
  run::save_config(dir / "cfg.json", cfg);
  const std::string c = "-c " + (dir / "cfg.json").string();
  for (const char* stage : {"gen-data", "pretrain", "train-ae", "train-recnet", "train-adversarial"}) {
    const Proc p = run_cli(std::string(stage) + " " + c);
    ASSERT_EQ(p.code, 0) << stage << "\n" << p.out;
  }
  Proc p = run_cli("train-attack --variant both " + c);
  ASSERT_EQ(p.code, 0) << p.out;
  p = run_cli("sweep " + c);
  ASSERT_EQ(p.code, 0) << p.out;
  p = run_cli("report " + c);
  ASSERT_EQ(p.code, 0) << p.out;

  const run::PipelineResult mem = run::run_pipeline(cfg);
  const run::Workspace ws(cfg.out_dir);
  for (auto [name, g] : std::initializer_list<std::pair<const char*, const nets::ModelGraph*>>{
           {"frontend", &mem.models.frontend},
           {"ae", &mem.models.ae},
           {"ad", &mem.models.ad},
           {"backend", &mem.models.backend},
           {"recnet", &mem.models.recnet},
           {"attack_bottleneck", &mem.attack_bottleneck},
           {"attack_latent", &mem.attack_latent}})
    EXPECT_EQ(read_file(ws.model_path(name)), g->params().serialize()) << name;
  for (const char* f : {"rd.csv", "summary.json", "rate_accuracy.svg", "psnr_accuracy.svg"})
    EXPECT_TRUE(std::filesystem::exists(ws.results_dir() / f)) << f;
  const auto curves = eval::read_curves_csv(ws.results_dir() / "rd.csv");
  EXPECT_EQ(curves.size(), 2u);
}

}  // namespace
}  // namespace fpc
