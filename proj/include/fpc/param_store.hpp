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
#include <span>
#include <string>
#include <vector>

#include "fpc/tensor.hpp"

namespace fpc {

struct Parameter {
  Tensor4D tensor;
  bool frozen = false;
  // Buffers (batch-norm running statistics) are checkpointed but never
  // receive gradients or optimizer updates.
  bool trainable = true;
};

// Named parameters in insertion order. Addresses of stored tensors are stable
// for the lifetime of the store, which is what lets a Tape alias them.
class ParamStore {
 public:
  Tensor4D& add(const std::string& name, Tensor4D init);
  Tensor4D& add_buffer(const std::string& name, Tensor4D init);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }

  void set_frozen(bool frozen);
  bool all_frozen() const;
  // Ensures every trainable, unfrozen parameter has a zeroed gradient buffer
  // and drops gradients of frozen ones.
  void zero_grad();

  std::size_t trainable_count() const;

  // FPCK checkpoint: "FPCK", version byte, then per entry: name length (u16),
  // name bytes, dims (4 x u32), raw little-endian f32 values.
  std::vector<std::uint8_t> serialize() const;
  // Loads values into existing entries; names and dims must match exactly.
  void load(std::span<const std::uint8_t> bytes);
  std::uint64_t fingerprint() const;

 private:
  std::map<std::string, Parameter> entries_;
  std::vector<std::string> order_;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

}  // namespace fpc
