// Copyright 2026 The AudioSpa Authors
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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "audiospa/common.hpp"
#include "audiospa/nn/tensor.hpp"
#include "audiospa/wav.hpp"

#include <json.hpp>

namespace audiospa::nn {

// Tensor container format: magic, version, tensor count, then per tensor a
// name, dtype tag (0 = f32, 1 = f64), rank, dims and raw little-endian data.
// A JSON sidecar at <path>.json carries run metadata.

constexpr char kCheckpointMagic[4] = {'A', 'S', 'T', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Real>
constexpr std::uint8_t dtype_tag() {
  static_assert(sizeof(Real) == 4 || sizeof(Real) == 8, "unsupported scalar");
  return sizeof(Real) == 4 ? 0 : 1;
}

template <typename Real>
void save_tensors(const std::filesystem::path& path, const ParamList<Real>& params) {
  std::string body;
  body.append(kCheckpointMagic, 4);
  detail::append_u32(body, kCheckpointVersion);
  detail::append_u32(body, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::append_u32(body, static_cast<std::uint32_t>(p.name.size()));
    body.append(p.name);
    body.push_back(static_cast<char>(dtype_tag<Real>()));
    body.push_back(static_cast<char>(p.value->shape.size()));
    for (auto d : p.value->shape) {
      detail::append_u32(body, static_cast<std::uint32_t>(d & 0xFFFFFFFFull));
      detail::append_u32(body, static_cast<std::uint32_t>(d >> 32));
    }
    const char* raw = reinterpret_cast<const char*>(p.value->ptr());
    body.append(raw, p.value->data.size() * sizeof(Real));
  }
  write_text_atomic(path, body);
}

template <typename Real>
void load_tensors(const std::filesystem::path& path, const ParamList<Real>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size()) throw DataError("truncated checkpoint: " + path.string());
  };
  need(12);
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw DataError("bad checkpoint magic: " + path.string());
  const auto* u8 = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t version = detail::read_u32(u8 + 4);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version");
  const std::uint32_t count = detail::read_u32(u8 + 8);
  pos = 12;
  if (count != params.size()) throw DataError("checkpoint tensor count mismatch");
  for (std::uint32_t idx = 0; idx < count; ++idx) {
    need(4);
    const std::uint32_t name_len = detail::read_u32(u8 + pos);
    pos += 4;
    need(name_len + 2);
    const std::string name(bytes.data() + pos, name_len);
    pos += name_len;
    const auto dtype = static_cast<std::uint8_t>(u8[pos++]);
    const auto rank = static_cast<std::uint8_t>(u8[pos++]);
    if (dtype != dtype_tag<Real>()) throw DataError("checkpoint dtype mismatch for " + name);
    std::vector<std::int64_t> shape(rank);
    need(static_cast<std::size_t>(rank) * 8);
    for (std::uint8_t r = 0; r < rank; ++r) {
      const std::uint64_t lo = detail::read_u32(u8 + pos);
      const std::uint64_t hi = detail::read_u32(u8 + pos + 4);
      shape[r] = static_cast<std::int64_t>(lo | (hi << 32));
      pos += 8;
    }
    const Param<Real>& p = params[idx];
    if (p.name != name) throw DataError("checkpoint tensor order mismatch: expected " + p.name + ", got " + name);
    if (p.value->shape != shape) throw DataError("checkpoint shape mismatch for " + name);
    const std::size_t nbytes = p.value->data.size() * sizeof(Real);
    need(nbytes);
    std::memcpy(p.value->ptr(), bytes.data() + pos, nbytes);
    pos += nbytes;
  }
}

inline void save_sidecar(const std::filesystem::path& tensor_path, const nlohmann::json& meta) {
  write_text_atomic(tensor_path.string() + ".json", meta.dump(2) + "\n");
}

inline nlohmann::json load_sidecar(const std::filesystem::path& tensor_path) {
  const std::filesystem::path p = tensor_path.string() + ".json";
  std::ifstream in(p);
  if (!in) throw DataError("missing checkpoint sidecar: " + p.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("bad checkpoint sidecar JSON: " + std::string(e.what()));
  }
  return j;
}

}  // namespace audiospa::nn
