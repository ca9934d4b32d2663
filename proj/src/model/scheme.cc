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

#include "bsrnn/model/scheme.h"

#include <cmath>
#include <string>

#include "bsrnn/error.h"

namespace bsrnn::model {

int BandSplitScheme::BandOf(int bin) const {
  BSRNN_CHECK(bin >= 0 && bin < num_bins(), ErrorKind::kScheme,
              "bin " + std::to_string(bin) + " outside the scheme");
  for (int k = 0; k < num_bands(); ++k) {
    if (bin < edges[k + 1]) return k;
  }
  return num_bands() - 1;
}

void BandSplitScheme::Validate(int bins) const {
  BSRNN_CHECK(edges.size() >= 2, ErrorKind::kScheme, "scheme needs >= 1 band");
  BSRNN_CHECK(edges.front() == 0, ErrorKind::kScheme, "first edge must be 0");
  BSRNN_CHECK(edges.back() == bins, ErrorKind::kScheme,
              "last edge " + std::to_string(edges.back()) + " != F = " +
                  std::to_string(bins));
  for (size_t i = 1; i < edges.size(); ++i) {
    BSRNN_CHECK(edges[i] > edges[i - 1], ErrorKind::kScheme,
                "band edges must increase strictly");
  }
  BSRNN_CHECK(split_band >= 1 && split_band <= num_bands(), ErrorKind::kScheme,
              "split band " + std::to_string(split_band) + " outside [1, " +
                  std::to_string(num_bands()) + "]");
}

BandSplitScheme BandSplitScheme::FromWidthsHz(
    const std::vector<std::pair<int, double>>& groups, int sample_rate,
    int fft_size) {
  const int bins = fft_size / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  BandSplitScheme s;
  s.edges.push_back(0);
  double hz = 0.0;
  for (const auto& [count, width] : groups) {
    for (int i = 0; i < count; ++i) {
      hz += width;
      const int e = static_cast<int>(std::lround(hz / bin_hz));
      if (e >= bins) break;
      if (e > s.edges.back()) s.edges.push_back(e);
    }
  }
  if (s.edges.back() >= bins) s.edges.pop_back();
  // The final band absorbs everything up to and including Nyquist.
  if (s.edges.size() >= 2 && s.edges.back() < bins) {
    s.edges.back() = bins;
  } else {
    s.edges.push_back(bins);
  }
  s.split_band = s.num_bands();
  return s;
}

BandSplitScheme BandSplitScheme::Default48k() {
  BandSplitScheme s =
      FromWidthsHz({{20, 200.0}, {6, 500.0}, {7, 2000.0}}, 48000, 960);
  s.split_band = SplitBandBelow(s.edges, 16000.0, 48000, 960);
  return s;
}

BandSplitScheme BandSplitScheme::Default16k() {
  BandSplitScheme s = FromWidthsHz({{20, 200.0}, {7, 500.0}}, 16000, 512);
  s.split_band = s.num_bands();
  return s;
}

BandSplitScheme BandSplitScheme::ForRate(int sample_rate) {
  if (sample_rate == 48000) return Default48k();
  if (sample_rate == 16000) return Default16k();
  throw Error(ErrorKind::kScheme,
              "no default band scheme for rate " + std::to_string(sample_rate));
}

BandSplitScheme BandSplitScheme::Uniform(int bins, int bands, int split_band) {
  BSRNN_CHECK(bands >= 1 && bands <= bins, ErrorKind::kScheme,
              "cannot split " + std::to_string(bins) + " bins into " +
                  std::to_string(bands) + " bands");
  BandSplitScheme s;
  for (int k = 0; k <= bands; ++k) {
    s.edges.push_back(static_cast<int>(static_cast<int64_t>(k) * bins / bands));
  }
  s.split_band = split_band;
  s.Validate(bins);
  return s;
}

int SplitBandBelow(const std::vector<int>& edges, double hz, int sample_rate,
                   int fft_size) {
  const double bin_hz = static_cast<double>(sample_rate) / fft_size;
  int b = 0;
  for (size_t k = 0; k + 1 < edges.size(); ++k) {
    // Band k spans bins [edges[k], edges[k+1]), i.e. up to edges[k+1] bins.
    if (edges[k + 1] * bin_hz <= hz) b = static_cast<int>(k) + 1;
  }
  return std::max(b, 1);
}

}  // namespace bsrnn::model
