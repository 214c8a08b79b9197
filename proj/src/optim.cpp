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

#include "fpc/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "fpc/error.hpp"

namespace fpc {

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0, double lr_floor) {
  FPC_CHECK(total_steps >= 1, ArgumentError, "cosine_lr: total_steps must be >= 1");
  FPC_CHECK(step >= 0 && step <= total_steps, ArgumentError,
            "cosine_lr: step " + std::to_string(step) + " outside [0, " +
                std::to_string(total_steps) + "]");
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_floor + 0.5 * (lr0 - lr_floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

double OptimState::current_lr() const {
  return cosine_lr(std::min(step, total_steps), total_steps, lr0, lr_floor);
}

void OptimState::validate() const {
  FPC_CHECK(lr_floor >= 0 && lr_floor <= lr0, ConfigError, "need 0 <= lr_floor <= lr0");
  FPC_CHECK(momentum >= 0 && momentum < 1, ConfigError, "momentum must lie in [0, 1)");
  FPC_CHECK(total_steps >= 1, ConfigError, "total_steps must be >= 1");
}

void sgd_step(ParamStore& params, OptimState& opt) {
  const Real lr = static_cast<Real>(opt.current_lr());
  const Real mom = static_cast<Real>(opt.momentum);
  for (const auto& name : params.names()) {
    Parameter& p = params.get(name);
    if (!p.trainable || p.frozen) continue;
    FPC_CHECK(p.tensor.has_grad(), StateError, "sgd_step: missing gradient for " + name);
    auto& v = opt.velocity[name];
    if (v.empty()) v.assign(p.tensor.numel(), Real(0));
    FPC_CHECK(v.size() == p.tensor.numel(), StateError, "velocity size mismatch for " + name);
    const auto g = std::as_const(p.tensor).grad();
    auto d = p.tensor.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      v[i] = mom * v[i] + g[i];
      d[i] -= lr * v[i];
    }
  }
  ++opt.step;
}

}  // namespace fpc
