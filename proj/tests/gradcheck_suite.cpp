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

#include "gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "fpc/autodiff.hpp"
#include "fpc/losses.hpp"
#include "fpc/networks.hpp"
#include "fpc/rng.hpp"

namespace fpc::gradcheck {
namespace {

static_assert(sizeof(Real) == 8, "the gradient suite needs the 64-bit build");

struct Probe {
  Tensor4D* tensor;
  std::vector<std::size_t> entries;
};

struct Problem {
  std::vector<Probe> probes;
  std::function<ad::Var(ad::Tape&)> build;  // scalar output
  std::function<void()> zero_grads;
};

Tensor4D uniform(Shape s, Rng& rng, double lo = -1, double hi = 1) {
  Tensor4D t(s);
  for (Real& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

std::vector<std::size_t> all_entries(const Tensor4D& t) {
  std::vector<std::size_t> v(t.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

std::vector<std::size_t> some_entries(const Tensor4D& t, std::size_t k, Rng& rng) {
  if (t.numel() <= k) return all_entries(t);
  std::vector<std::size_t> idx = all_entries(t);
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double value_of(const Problem& p) {
  ad::Tape tape;
  return p.build(tape).value()[0];
}

// Returns the worst error over the probes and adds the number of checked entries.
double check(Problem& p, std::size_t& checked) {
  for (Probe& pr : p.probes) pr.tensor->zero_grad();
  if (p.zero_grads) p.zero_grads();
  std::vector<std::vector<double>> analytic;
  {
    ad::Tape tape;
    const ad::Var out = p.build(tape);
    tape.backward(out);
    for (Probe& pr : p.probes) {
      const auto g = pr.tensor->grad();
      std::vector<double> a;
      for (std::size_t i : pr.entries) a.push_back(g[i]);
      analytic.push_back(std::move(a));
    }
  }
  double worst = 0;
  for (std::size_t k = 0; k < p.probes.size(); ++k) {
    Probe& pr = p.probes[k];
    double max_diff = 0, max_a = 0, max_n = 0;
    for (std::size_t j = 0; j < pr.entries.size(); ++j) {
      Real& v = pr.tensor->data()[pr.entries[j]];
      const Real saved = v;
      v = saved + kStep;
      const double up = value_of(p);
      v = saved - kStep;
      const double down = value_of(p);
      v = saved;
      const double numeric = (up - down) / (2 * kStep);
      max_diff = std::max(max_diff, std::abs(analytic[k][j] - numeric));
      max_a = std::max(max_a, std::abs(analytic[k][j]));
      max_n = std::max(max_n, std::abs(numeric));
    }
    checked += pr.entries.size();
    worst = std::max(worst, max_diff / std::max({max_a, max_n, 1e-8}));
  }
  return worst;
}

// Inputs owned by one problem instance; tape.param aliases them.
struct Inputs {
  std::vector<std::unique_ptr<Tensor4D>> items;
  Tensor4D& add(Tensor4D t) {
    items.push_back(std::make_unique<Tensor4D>(std::move(t)));
    return *items.back();
  }
};

ad::Var project(const ad::Var& out, const Tensor4D& weights) { return ad::dot(out, weights); }

using Maker = std::function<double(std::uint64_t seed, std::size_t& checked)>;

double simple_case(std::uint64_t seed, std::size_t& checked, const std::vector<Shape>& shapes,
                   const std::function<ad::Var(ad::Tape&, std::vector<ad::Var>&)>& fn, Shape out_shape,
                   double lo = -1, double hi = 1) {
  Rng rng(seed);
  Inputs in;
  std::vector<Tensor4D*> ts;
  for (const Shape& s : shapes) ts.push_back(&in.add(uniform(s, rng, lo, hi)));
  const Tensor4D w = uniform(out_shape, rng);
  Problem p;
  for (Tensor4D* t : ts) p.probes.push_back({t, all_entries(*t)});
  p.build = [&](ad::Tape& tape) {
    std::vector<ad::Var> vs;
    for (Tensor4D* t : ts) vs.push_back(tape.param(*t, true));
    return project(fn(tape, vs), w);
  };
  return check(p, checked);
}

double model_case(std::uint64_t seed, std::size_t& checked, nets::ModelGraph model, Shape in_shape) {
  Rng rng(seed);
  Inputs in;
  Tensor4D& x = in.add(uniform(in_shape, rng));
  const Tensor4D w = uniform(model.output_shape(in_shape), rng);
  model.set_frozen(false);
  Problem p;
  p.probes.push_back({&x, all_entries(x)});
  for (const std::string& name : model.params().names()) {
    Parameter& prm = model.params().get(name);
    if (!prm.trainable) continue;
    p.probes.push_back({&prm.tensor, some_entries(prm.tensor, 12, rng)});
  }
  p.build = [&](ad::Tape& tape) {
    return project(model.forward(tape, tape.param(x, true), nets::ForwardMode::Train), w);
  };
  p.zero_grads = [&] { model.params().zero_grad(); };
  return check(p, checked);
}

// Differences bounded away from zero in the image and in both Sobel maps, so
// every l1 term stays on one side of its kink under the perturbation.
std::pair<Tensor4D, Tensor4D> separated_pair(Shape s, Rng& rng) {
  Tensor4D x = uniform(s, rng), xhat(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) {
          const double d = 1.0 + 0.3 * static_cast<double>(i) + 0.2 * static_cast<double>(j) + rng.uniform(-0.01, 0.01);
          xhat.at(n, c, i, j) = x.at(n, c, i, j) - d;
        }
  return {std::move(x), std::move(xhat)};
}

std::vector<std::pair<std::string, Maker>> cases() {
  using V = std::vector<ad::Var>;
  std::vector<std::pair<std::string, Maker>> c;
  c.emplace_back("conv2d", [](std::uint64_t s, std::size_t& n) {
    return simple_case(s, n, {{2, 3, 5, 5}, {4, 3, 3, 3}, {4, 1, 1, 1}},
                       [](ad::Tape&, V& v) { return ad::conv2d(v[0], v[1], v[2], 1, 1); }, {2, 4, 5, 5});
  });
  c.emplace_back("conv2d_stride2", [](std::uint64_t s, std::size_t& n) {
    return simple_case(s, n, {{2, 2, 6, 6}, {3, 2, 3, 3}},
                       [](ad::Tape&, V& v) { return ad::conv2d(v[0], v[1], std::nullopt, 2, 1); }, {2, 3, 3, 3});
  });
  c.emplace_back("deconv2d", [](std::uint64_t s, std::size_t& n) {
    return simple_case(s, n, {{2, 3, 3, 3}, {3, 2, 4, 4}, {2, 1, 1, 1}},
                       [](ad::Tape&, V& v) { return ad::deconv2d(v[0], v[1], v[2], 2, 1); }, {2, 2, 6, 6});
  });
  c.emplace_back("batchnorm_train", [](std::uint64_t s, std::size_t& n) {
    auto rm = std::make_shared<std::vector<Real>>(3, 0.0);
    auto rv = std::make_shared<std::vector<Real>>(3, 1.0);
    return simple_case(s, n, {{3, 3, 3, 3}, {1, 3, 1, 1}, {1, 3, 1, 1}},
                       [rm, rv](ad::Tape&, V& v) {
                         return ad::batchnorm2d(v[0], v[1], v[2], *rm, *rv, {.training = true});
                       },
                       {3, 3, 3, 3});
  });
  c.emplace_back("batchnorm_eval", [](std::uint64_t s, std::size_t& n) {
    Rng r(s + 1000);
    auto rm = std::make_shared<std::vector<Real>>();
    auto rv = std::make_shared<std::vector<Real>>();
    for (int i = 0; i < 3; ++i) rm->push_back(r.uniform(-0.5, 0.5)), rv->push_back(r.uniform(0.5, 2.0));
    return simple_case(s, n, {{2, 3, 3, 3}, {1, 3, 1, 1}, {1, 3, 1, 1}},
                       [rm, rv](ad::Tape&, V& v) {
                         return ad::batchnorm2d(v[0], v[1], v[2], *rm, *rv, {.training = false});
                       },
                       {2, 3, 3, 3});
  });
  c.emplace_back("silu", [](std::uint64_t s, std::size_t& n) {
    return simple_case(s, n, {{2, 3, 4, 4}}, [](ad::Tape&, V& v) { return ad::silu(v[0]); }, {2, 3, 4, 4}, -4, 4);
  });
  c.emplace_back("add_sub_scale", [](std::uint64_t s, std::size_t& n) {
    return simple_case(s, n, {{2, 2, 3, 3}, {2, 2, 3, 3}},
                       [](ad::Tape&, V& v) {
                         return ad::add_scaled(ad::add(v[0], ad::scale(v[1], 0.7)), ad::sub(v[1], v[0]), -1.3);
                       },
                       {2, 2, 3, 3});
  });
  c.emplace_back("global_avg_pool", [](std::uint64_t s, std::size_t& n) {
    return simple_case(s, n, {{2, 3, 4, 5}}, [](ad::Tape&, V& v) { return ad::global_avg_pool(v[0]); }, {2, 3, 1, 1});
  });
  c.emplace_back("linear", [](std::uint64_t s, std::size_t& n) {
    return simple_case(s, n, {{3, 4, 1, 1}, {5, 4, 1, 1}, {5, 1, 1, 1}},
                       [](ad::Tape&, V& v) { return ad::linear(v[0], v[1], v[2]); }, {3, 5, 1, 1});
  });
  c.emplace_back("depthwise_sobel", [](std::uint64_t s, std::size_t& n) {
    return simple_case(s, n, {{2, 2, 5, 5}}, [](ad::Tape&, V& v) { return ad::depthwise3x3(v[0], loss::kSobelY); },
                       {2, 2, 5, 5});
  });
  c.emplace_back("mean_abs", [](std::uint64_t s, std::size_t& n) {
    // Values in [0.1, 1] with random signs keep clear of the kink at zero.
    Rng rng(s);
    Inputs in;
    Tensor4D& x = in.add(uniform({2, 2, 3, 3}, rng, 0.1, 1.0));
    for (Real& v : x.data())
      if (rng.uniform() < 0.5) v = -v;
    Problem p;
    p.probes.push_back({&x, all_entries(x)});
    p.build = [&](ad::Tape& tape) { return ad::mean_abs(tape.param(x, true)); };
    return check(p, n);
  });
  c.emplace_back("cross_entropy", [](std::uint64_t s, std::size_t& n) {
    Rng rng(s);
    Inputs in;
    Tensor4D& x = in.add(uniform({4, 5, 1, 1}, rng, -3, 3));
    std::vector<std::int32_t> labels;
    for (int i = 0; i < 4; ++i) labels.push_back(static_cast<std::int32_t>(rng.below(5)));
    Problem p;
    p.probes.push_back({&x, all_entries(x)});
    p.build = [&](ad::Tape& tape) { return ad::cross_entropy(tape.param(x, true), labels); };
    return check(p, n);
  });
  c.emplace_back("resblock", [](std::uint64_t s, std::size_t& n) {
    Rng rng(s);
    Inputs in;
    ParamStore ps;
    const std::size_t ch = 4;
    ps.add("rb.conv1.weight", uniform({ch, ch, 3, 3}, rng, -0.4, 0.4));
    ps.add("rb.conv2.weight", uniform({ch, ch, 3, 3}, rng, -0.4, 0.4));
    ps.add("rb.conv2.bias", uniform({ch, 1, 1, 1}, rng, -0.2, 0.2));
    ps.add("rb.bn.gamma", uniform({1, ch, 1, 1}, rng, 0.5, 1.5));
    ps.add("rb.bn.beta", uniform({1, ch, 1, 1}, rng, -0.2, 0.2));
    ps.add_buffer("rb.bn.running_mean", Tensor4D({1, ch, 1, 1}, 0.0));
    ps.add_buffer("rb.bn.running_var", Tensor4D({1, ch, 1, 1}, 1.0));
    Tensor4D& x = in.add(uniform({2, ch, 4, 4}, rng));
    const Tensor4D w = uniform({2, ch, 4, 4}, rng);
    Problem p;
    p.probes.push_back({&x, all_entries(x)});
    for (const char* name : {"rb.conv1.weight", "rb.conv2.weight", "rb.conv2.bias", "rb.bn.gamma", "rb.bn.beta"})
      p.probes.push_back({&ps.get(name).tensor, all_entries(ps.get(name).tensor)});
    p.build = [&](ad::Tape& tape) {
      return project(nets::resblock_forward(tape, tape.param(x, true), ps, "rb.", true, true, true), w);
    };
    p.zero_grads = [&] { ps.zero_grad(); };
    return check(p, n);
  });
  c.emplace_back("autoencoder", [](std::uint64_t s, std::size_t& n) {
    nets::SplitConfig cfg;
    return model_case(s, n, nets::build_default_models(cfg, s).ae, {1, cfg.frontend_channels, 3, 3});
  });
  c.emplace_back("autodecoder", [](std::uint64_t s, std::size_t& n) {
    nets::SplitConfig cfg;
    return model_case(s, n, nets::build_default_models(cfg, s).ad, {2, cfg.bottleneck_channels, 3, 3});
  });
  c.emplace_back("recnet_bottleneck", [](std::uint64_t s, std::size_t& n) {
    nets::SplitConfig cfg;
    return model_case(s, n, nets::build_recnet(cfg, nets::RecNetVariant::Bottleneck, s),
                      {2, cfg.bottleneck_channels, 2, 2});
  });
  c.emplace_back("recnet_latent", [](std::uint64_t s, std::size_t& n) {
    nets::SplitConfig cfg;
    return model_case(s, n, nets::build_recnet(cfg, nets::RecNetVariant::Latent, s),
                      {2, cfg.frontend_channels, 2, 2});
  });
  c.emplace_back("rec_loss", [](std::uint64_t s, std::size_t& n) {
    Rng rng(s);
    Inputs in;
    auto [x0, xh0] = separated_pair({2, 3, 5, 5}, rng);
    Tensor4D& x = in.add(std::move(x0));
    Tensor4D& xhat = in.add(std::move(xh0));
    loss::LossConfig cfg;
    Problem p;
    p.probes.push_back({&x, all_entries(x)});
    p.probes.push_back({&xhat, all_entries(xhat)});
    p.build = [&](ad::Tape& tape) { return loss::rec_loss(tape.param(x, true), tape.param(xhat, true), cfg).total; };
    return check(p, n);
  });
  c.emplace_back("total_loss", [](std::uint64_t s, std::size_t& n) {
    Rng rng(s);
    Inputs in;
    Tensor4D& logits = in.add(uniform({3, 4, 1, 1}, rng, -2, 2));
    auto [x0, xh0] = separated_pair({3, 1, 4, 4}, rng);
    Tensor4D& x = in.add(std::move(x0));
    Tensor4D& xhat = in.add(std::move(xh0));
    const std::vector<std::int32_t> labels{0, 3, 1};
    loss::LossConfig cfg;
    Problem p;
    for (Tensor4D* t : {&logits, &x, &xhat}) p.probes.push_back({t, all_entries(*t)});
    p.build = [&](ad::Tape& tape) {
      const ad::Var obj = loss::task_loss(tape.param(logits, true), labels);
      const ad::Var rec = loss::rec_loss(tape.param(x, true), tape.param(xhat, true), cfg).total;
      return loss::total_loss(obj, rec, cfg);
    };
    return check(p, n);
  });
  return c;
}

}  // namespace

std::vector<CaseResult> run_suite(std::size_t seeds) {
  std::vector<CaseResult> out;
  for (auto& [name, make] : cases()) {
    CaseResult r{name, seeds, 0, 0};
    for (std::size_t s = 0; s < seeds; ++s)
      r.max_rel_error = std::max(r.max_rel_error, make(Rng::derive(0x6763, s), r.checked));
    out.push_back(r);
  }
  return out;
}

}  // namespace fpc::gradcheck
