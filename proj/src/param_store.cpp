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

#include "fpc/param_store.hpp"

#include <limits>

#include "fpc/byte_io.hpp"
#include "fpc/error.hpp"

namespace fpc {

Tensor4D& ParamStore::add(const std::string& name, Tensor4D init) {
  FPC_CHECK(!contains(name), ArgumentError, "duplicate parameter name " + name);
  FPC_CHECK(name.size() <= std::numeric_limits<std::uint16_t>::max(), ArgumentError,
            "parameter name too long");
  order_.push_back(name);
  return entries_.emplace(name, Parameter{std::move(init), false, true}).first->second.tensor;
}

Tensor4D& ParamStore::add_buffer(const std::string& name, Tensor4D init) {
  Tensor4D& t = add(name, std::move(init));
  entries_.at(name).trainable = false;
  return t;
}

Parameter& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  FPC_CHECK(it != entries_.end(), ArgumentError, "unknown parameter " + name);
  return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  FPC_CHECK(it != entries_.end(), ArgumentError, "unknown parameter " + name);
  return it->second;
}

void ParamStore::set_frozen(bool frozen) {
  for (auto& [name, p] : entries_) p.frozen = frozen;
}

bool ParamStore::all_frozen() const {
  for (const auto& [name, p] : entries_)
    if (!p.frozen) return false;
  return true;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : entries_) {
    if (p.trainable && !p.frozen)
      p.tensor.zero_grad();
    else
      p.tensor.drop_grad();
  }
}

std::size_t ParamStore::trainable_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_)
    if (p.trainable) n += p.tensor.numel();
  return n;
}

std::vector<std::uint8_t> ParamStore::serialize() const {
  ByteWriter w;
  w.str("FPCK");
  w.u8(kCheckpointVersion);
  for (const auto& name : order_) {
    const Tensor4D& t = entries_.at(name).tensor;
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.str(name);
    for (std::size_t d : t.shape().as_array()) w.u32(static_cast<std::uint32_t>(d));
    for (Real v : t.data()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

void ParamStore::load(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  FPC_CHECK(r.str(4) == "FPCK", DecodeError, "not an FPCK checkpoint");
  const std::uint8_t version = r.u8();
  FPC_CHECK(version == kCheckpointVersion, DecodeError,
            "unsupported checkpoint version " + std::to_string(version));
  std::size_t seen = 0;
  while (!r.done()) {
    const std::string name = r.str(r.u16());
    Shape s;
    s.n = r.u32();
    s.c = r.u32();
    s.h = r.u32();
    s.w = r.u32();
    auto it = entries_.find(name);
    FPC_CHECK(it != entries_.end(), DecodeError, "checkpoint has unknown parameter " + name);
    Tensor4D& t = it->second.tensor;
    FPC_CHECK(t.shape() == s, DecodeError,
              "checkpoint dims " + s.str() + " for " + name + " do not match model " +
                  t.shape().str());
    for (std::size_t i = 0; i < s.numel(); ++i) t[i] = static_cast<Real>(r.f32());
    ++seen;
  }
  FPC_CHECK(seen == order_.size(), DecodeError,
            "checkpoint covers " + std::to_string(seen) + " of " + std::to_string(order_.size()) +
                " parameters");
}

std::uint64_t ParamStore::fingerprint() const { return fnv1a64(serialize()); }

}  // namespace fpc
