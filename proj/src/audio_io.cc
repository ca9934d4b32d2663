// Copyright (c) 2026 The bsrnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bsrnn/audio_io.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bsrnn/error.h"

namespace bsrnn {
namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;
constexpr uint16_t kFormatExtensible = 0xFFFE;

uint16_t Le16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t Le32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void Put16(std::vector<unsigned char>* out, uint16_t v) {
  out->push_back(v & 0xFF);
  out->push_back((v >> 8) & 0xFF);
}

void Put32(std::vector<unsigned char>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back((v >> (8 * i)) & 0xFF);
}

}  // namespace

bool IsModelRate(int sample_rate) {
  return sample_rate == 16000 || sample_rate == 48000;
}

void CheckModelWaveform(const Waveform& w) {
  BSRNN_CHECK(IsModelRate(w.sample_rate), ErrorKind::kParameter,
              "model-facing waveform must be 16 or 48 kHz, got " +
                  std::to_string(w.sample_rate));
  for (float v : w.samples) {
    BSRNN_CHECK(std::isfinite(v), ErrorKind::kParameter,
                "waveform contains non-finite samples");
  }
}

Waveform DecodeWav(const std::vector<unsigned char>& bytes) {
  BSRNN_CHECK(bytes.size() >= 12, ErrorKind::kIo, "truncated RIFF header");
  BSRNN_CHECK(std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
                  std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
              ErrorKind::kFormat, "not a RIFF/WAVE file");

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    uint32_t size = Le32(chunk + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      BSRNN_CHECK(size >= 16 && body + size <= bytes.size(), ErrorKind::kIo,
                  "truncated fmt chunk");
      format = Le16(bytes.data() + body);
      channels = Le16(bytes.data() + body + 2);
      rate = Le32(bytes.data() + body + 4);
      bits = Le16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        BSRNN_CHECK(size >= 40, ErrorKind::kFormat,
                    "malformed WAVE_FORMAT_EXTENSIBLE header");
        format = Le16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      BSRNN_CHECK(body + size <= bytes.size(), ErrorKind::kIo,
                  "truncated data chunk");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1);
  }
  BSRNN_CHECK(have_fmt, ErrorKind::kFormat, "missing fmt chunk");
  BSRNN_CHECK(data != nullptr, ErrorKind::kIo, "missing data chunk");
  BSRNN_CHECK(channels > 0, ErrorKind::kFormat, "zero channels");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool pcm24 = format == kFormatPcm && bits == 24;
  const bool f32 = format == kFormatFloat && bits == 32;
  BSRNN_CHECK(pcm16 || pcm24 || f32, ErrorKind::kFormat,
              "unsupported codec (format " + std::to_string(format) + ", " +
                  std::to_string(bits) + " bits)");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  BSRNN_CHECK(data_size % frame_bytes == 0, ErrorKind::kIo,
              "data chunk is not a whole number of frames");
  const std::size_t frames = data_size / frame_bytes;

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.channels = 1;
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const unsigned char* p = data + i * frame_bytes + ch * bytes_per_sample;
      double v;
      if (pcm16) {
        v = static_cast<int16_t>(Le16(p)) / 32768.0;
      } else if (pcm24) {
        int32_t s = static_cast<int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      } else {
        uint32_t u = Le32(p);
        float f;
        std::memcpy(&f, &u, sizeof(f));
        BSRNN_CHECK(std::isfinite(f), ErrorKind::kFormat,
                    "float sample is NaN or Inf");
        v = f;
      }
      acc += v;
    }
    w.samples[i] = channels == 1 ? static_cast<float>(acc)
                                 : static_cast<float>(acc / channels);
  }
  return w;
}

Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  BSRNN_CHECK(in.good(), ErrorKind::kIo, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return DecodeWav(bytes);
}

std::vector<unsigned char> EncodeWav(const Waveform& w, WavFormat format) {
  for (float v : w.samples) {
    BSRNN_CHECK(std::isfinite(v), ErrorKind::kParameter,
                "cannot write non-finite samples");
  }
  const uint16_t bits = format == WavFormat::kPcm16 ? 16 : 32;
  const uint16_t tag = format == WavFormat::kPcm16 ? kFormatPcm : kFormatFloat;
  const uint32_t data_bytes =
      static_cast<uint32_t>(w.samples.size() * (bits / 8));

  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  Put32(&out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  Put32(&out, 16);
  Put16(&out, tag);
  Put16(&out, 1);
  Put32(&out, static_cast<uint32_t>(w.sample_rate));
  Put32(&out, static_cast<uint32_t>(w.sample_rate) * (bits / 8));
  Put16(&out, bits / 8);
  Put16(&out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  Put32(&out, data_bytes);
  for (float v : w.samples) {
    if (format == WavFormat::kPcm16) {
      double q = std::round(static_cast<double>(v) * 32768.0);
      q = std::clamp(q, -32768.0, 32767.0);
      Put16(&out, static_cast<uint16_t>(static_cast<int16_t>(q)));
    } else {
      uint32_t u;
      std::memcpy(&u, &v, sizeof(u));
      Put32(&out, u);
    }
  }
  return out;
}

void WriteWav(const std::string& path, const Waveform& w, WavFormat format) {
  std::vector<unsigned char> bytes = EncodeWav(w, format);
  std::ofstream out(path, std::ios::binary);
  BSRNN_CHECK(out.good(), ErrorKind::kIo, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  BSRNN_CHECK(out.good(), ErrorKind::kIo, "failed writing " + path);
}

}  // namespace bsrnn
