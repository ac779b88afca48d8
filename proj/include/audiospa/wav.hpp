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

namespace audiospa {

struct WavData {
  int sample_rate_hz = 0;
  std::vector<std::vector<double>> channels;  // deinterleaved

  std::size_t frames() const { return channels.empty() ? 0 : channels[0].size(); }
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void append_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void append_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xFF));
  s.push_back(static_cast<char>((v >> 8) & 0xFF));
}

}  // namespace detail

// Accepts 16-bit PCM and 32-bit IEEE float, mono or multichannel.
inline WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw DataError("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, num_channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::uint32_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t chunk_size = detail::read_u32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0 && chunk_size >= 16) {
      format = detail::read_u16(chunk + 8);
      num_channels = detail::read_u16(chunk + 10);
      rate = detail::read_u32(chunk + 12);
      bits = detail::read_u16(chunk + 22);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data_ptr = chunk + 8;
      data_size = chunk_size;
      if (pos + 8 + data_size > bytes.size()) data_size = static_cast<std::uint32_t>(bytes.size() - pos - 8);
    }
    pos += 8 + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (num_channels == 0 || rate == 0 || data_ptr == nullptr)
    throw DataError("missing fmt/data chunk: " + path.string());
  const bool pcm16 = (format == 1 && bits == 16);
  const bool float32 = (format == 3 && bits == 32);
  if (!pcm16 && !float32)
    throw DataError("unsupported WAV encoding (want PCM16 or float32): " + path.string());

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * num_channels);
  WavData out;
  out.sample_rate_hz = static_cast<int>(rate);
  out.channels.assign(num_channels, std::vector<double>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::uint16_t c = 0; c < num_channels; ++c) {
      const unsigned char* s = data_ptr + (f * num_channels + c) * bytes_per_sample;
      if (pcm16) {
        const auto v = static_cast<std::int16_t>(detail::read_u16(s));
        out.channels[c][f] = static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, s, 4);
        out.channels[c][f] = static_cast<double>(v);
      }
    }
  }
  return out;
}

// Writes 32-bit float WAV. The file appears atomically: content goes to a
// temp file in the same directory which is then renamed over the target.
inline void write_wav(const std::filesystem::path& path,
                      const std::vector<std::vector<double>>& channels, int sample_rate_hz) {
  if (channels.empty()) throw DomainError("write_wav: no channels");
  const std::size_t frames = channels[0].size();
  for (const auto& ch : channels)
    if (ch.size() != frames) throw DomainError("write_wav: channel length mismatch");
  const auto num_channels = static_cast<std::uint16_t>(channels.size());

  std::string body;
  body.reserve(44 + frames * num_channels * 4);
  const std::uint32_t data_size = static_cast<std::uint32_t>(frames * num_channels * 4);
  body.append("RIFF");
  detail::append_u32(body, 36 + data_size);
  body.append("WAVE");
  body.append("fmt ");
  detail::append_u32(body, 16);
  detail::append_u16(body, 3);  // IEEE float
  detail::append_u16(body, num_channels);
  detail::append_u32(body, static_cast<std::uint32_t>(sample_rate_hz));
  detail::append_u32(body, static_cast<std::uint32_t>(sample_rate_hz) * num_channels * 4);
  detail::append_u16(body, static_cast<std::uint16_t>(num_channels * 4));
  detail::append_u16(body, 32);
  body.append("data");
  detail::append_u32(body, data_size);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::uint16_t c = 0; c < num_channels; ++c) {
      const float v = static_cast<float>(channels[c][f]);
      char raw[4];
      std::memcpy(raw, &v, 4);
      body.append(raw, 4);
    }
  }

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    if (!o) throw DataError("cannot write: " + tmp.string());
    o.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!o) throw DataError("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Atomic small-text writer shared by the JSON/CSV emitters.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
    if (!o) throw DataError("cannot write: " + tmp.string());
    o.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!o) throw DataError("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace audiospa
