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

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "audiospa/common.hpp"
#include "audiospa/rng.hpp"

#include <json.hpp>

namespace audiospa {

// Token-embedding matrix, tokens by embedding dimension. Encoders are frozen:
// they expose no trainable parameters and gradients stop here.
struct TokenEmbeddings {
  std::vector<double> data;  // row-major [tokens, dim]
  int tokens = 0;
  int dim = 0;

  double at(int t, int d) const { return data[static_cast<std::size_t>(t) * dim + d]; }
};

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual TokenEmbeddings encode(const std::string& prompt) const = 0;
  virtual int dim() const = 0;
  virtual std::string key() const = 0;
};

inline std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

// Training-free encoder: each token's embedding row is drawn from a
// counter-based stream keyed on a fixed seed constant and the token's hash.
// Deterministic across processes, and distinct tokens get distinct rows.
class StubEncoder : public TextEncoder {
 public:
  static constexpr std::uint64_t kSeedConstant = 0xA5D105FA0001ull;
  static constexpr int kDefaultDim = 64;

  explicit StubEncoder(int dim = kDefaultDim) : dim_(dim) {
    if (dim <= 0) throw ConfigError("StubEncoder: dimension must be positive");
  }

  TokenEmbeddings encode(const std::string& prompt) const override {
    const std::vector<std::string> tokens = tokenize_words(prompt);
    if (tokens.empty()) throw DomainError("encode_text: empty prompt");
    TokenEmbeddings out;
    out.tokens = static_cast<int>(tokens.size());
    out.dim = dim_;
    out.data.resize(tokens.size() * static_cast<std::size_t>(dim_));
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      Rng rng = Rng::keyed({kSeedConstant, fnv1a64(tokens[t])});
      for (int d = 0; d < dim_; ++d) out.data[t * dim_ + d] = rng.uniform(-1.0, 1.0);
    }
    return out;
  }

  int dim() const override { return dim_; }
  std::string key() const override {
    return dim_ == kDefaultDim ? "stub" : "stub:" + std::to_string(dim_);
  }

 private:
  int dim_;
};

// Adapter for embeddings produced offline by a large pretrained encoder.
// Looks up <dir>/<fnv1a64(prompt) hex>.json holding {"tokens": [[...], ...]}.
// The directory comes from AUDIOSPA_EMBEDDINGS_DIR; when it is unset or the
// prompt is missing, the encoder reports itself unavailable rather than
// falling back to anything else.
class PrecomputedEncoder : public TextEncoder {
 public:
  PrecomputedEncoder(std::string key, int dim) : key_(std::move(key)), dim_(dim) {
    const char* dir = std::getenv("AUDIOSPA_EMBEDDINGS_DIR");
    if (dir == nullptr || !std::filesystem::is_directory(dir))
      throw EncoderUnavailableError("encoder '" + key_ +
                                    "' unavailable: set AUDIOSPA_EMBEDDINGS_DIR to a directory of "
                                    "precomputed token embeddings");
    dir_ = dir;
  }

  TokenEmbeddings encode(const std::string& prompt) const override {
    if (tokenize_words(prompt).empty()) throw DomainError("encode_text: empty prompt");
    char name[32];
    std::snprintf(name, sizeof(name), "%016llx.json", static_cast<unsigned long long>(fnv1a64(prompt)));
    const std::filesystem::path file = dir_ / name;
    std::ifstream in(file);
    if (!in)
      throw EncoderUnavailableError("encoder '" + key_ + "' has no precomputed embedding for prompt (expected " +
                                    file.string() + ")");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw DataError("bad embedding file " + file.string() + ": " + e.what());
    }
    const auto& rows = j.at("tokens");
    if (rows.empty()) throw DataError("embedding file has no tokens: " + file.string());
    TokenEmbeddings out;
    out.tokens = static_cast<int>(rows.size());
    out.dim = dim_;
    out.data.reserve(rows.size() * static_cast<std::size_t>(dim_));
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != dim_)
        throw DataError("embedding width != " + std::to_string(dim_) + " in " + file.string());
      for (const auto& v : row) out.data.push_back(v.get<double>());
    }
    return out;
  }

  int dim() const override { return dim_; }
  std::string key() const override { return key_; }

 private:
  std::string key_;
  int dim_;
  std::filesystem::path dir_;
};

// Config keys: "stub" (optionally "stub:<dim>"), "pretrained-base" (768),
// "pretrained-large" (1024).
inline std::unique_ptr<TextEncoder> make_encoder(const std::string& key) {
  if (key == "stub") return std::make_unique<StubEncoder>();
  if (key.rfind("stub:", 0) == 0) return std::make_unique<StubEncoder>(std::stoi(key.substr(5)));
  if (key == "pretrained-base") return std::make_unique<PrecomputedEncoder>(key, 768);
  if (key == "pretrained-large") return std::make_unique<PrecomputedEncoder>(key, 1024);
  throw ConfigError("unknown encoder key: " + key);
}

inline int encoder_dim_for_key(const std::string& key) {
  if (key == "stub") return StubEncoder::kDefaultDim;
  if (key.rfind("stub:", 0) == 0) return std::stoi(key.substr(5));
  if (key == "pretrained-base") return 768;
  if (key == "pretrained-large") return 1024;
  throw ConfigError("unknown encoder key: " + key);
}

}  // namespace audiospa
