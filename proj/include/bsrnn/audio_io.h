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

#ifndef BSRNN_AUDIO_IO_H_
#define BSRNN_AUDIO_IO_H_

#include <cstddef>
#include <string>
#include <vector>

namespace bsrnn {

// Mono waveform. Samples are nominally in [-1, 1] but are not clipped until
// a PCM export.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;
  int channels = 1;

  Waveform() = default;
  Waveform(std::vector<float> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

enum class WavFormat { kPcm16, kFloat32 };

bool IsModelRate(int sample_rate);

// Throws kParameter unless the waveform is at 16 or 48 kHz and finite.
void CheckModelWaveform(const Waveform& w);

// Reads PCM16, PCM24 or float32 RIFF/WAVE; multichannel input is averaged.
Waveform ReadWav(const std::string& path);

// Decodes an in-memory RIFF image (used by ReadWav and for stdin streams).
Waveform DecodeWav(const std::vector<unsigned char>& bytes);

void WriteWav(const std::string& path, const Waveform& w,
              WavFormat format = WavFormat::kFloat32);

std::vector<unsigned char> EncodeWav(const Waveform& w, WavFormat format);

}  // namespace bsrnn

#endif  // BSRNN_AUDIO_IO_H_
