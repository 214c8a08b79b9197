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
#include <map>
#include <string>
#include <vector>

#include "fpc/param_store.hpp"

namespace fpc {

// lr(step) = lr_floor + (lr0 - lr_floor) * (1 + cos(pi * step / total_steps)) / 2
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr0, double lr_floor);

struct OptimState {
  double lr0 = 0.01;
  double lr_floor = 0.001;
  double momentum = 0.937;
  std::int64_t step = 0;
  std::int64_t total_steps = 1;
  std::map<std::string, std::vector<Real>> velocity;

  double current_lr() const;
  void validate() const;
};

// Momentum SGD: v <- momentum * v + grad; p <- p - lr * v, with lr taken from
// the cosine schedule at opt.step (held at lr_floor past the horizon).
// Frozen parameters and buffers are never touched.
void sgd_step(ParamStore& params, OptimState& opt);

}  // namespace fpc
