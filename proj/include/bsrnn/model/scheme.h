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


#ifndef BSRNN_MODEL_SCHEME_H_
#define BSRNN_MODEL_SCHEME_H_

#include <vector>

namespace bsrnn::model {

// Partition of the F one-sided STFT bins into K contiguous bands. Bands
// [0, split_band) are modelled bi-directionally along frequency, the rest
// uni-directionally from low to high.
struct BandSplitScheme {
  std::vector<int> edges;  // K + 1 bin indices, edges[0] = 0, edges[K] = F
  int split_band = 0;

  int num_bands() const { return static_cast<int>(edges.size()) - 1; }
  int num_bins() const { return edges.empty() ? 0 : edges.back(); }
  int width(int k) const { return edges[k + 1] - edges[k]; }
  int begin(int k) const { return edges[k]; }
  // Band containing a bin.
  int BandOf(int bin) const;
  // Scheme error unless the edges partition exactly `num_bins` bins and
  // 1 <= split_band <= K.
  void Validate(int num_bins) const;

  // Bands of the given widths in Hz starting at 0, rounded to bins, with the
  // last band stretched to Nyquist.
  static BandSplitScheme FromWidthsHz(const std::vector<std::pair<int, double>>& groups,
                                      int sample_rate, int fft_size);
  // 20 x 200 Hz, 6 x 500 Hz, 7 x 2 kHz for 48 kHz / 960-point frames.
  static BandSplitScheme Default48k();
  // Same widths up to 4 kHz, then 500 Hz bands to Nyquist, for 16 kHz /
  // 512-point frames.
  static BandSplitScheme Default16k();
  static BandSplitScheme ForRate(int sample_rate);
  // K bands of (almost) equal width, for toy models.
  static BandSplitScheme Uniform(int num_bins, int num_bands, int split_band);
};

// Largest band count whose upper edge stays at or below `hz`.
int SplitBandBelow(const std::vector<int>& edges, double hz, int sample_rate,
                   int fft_size);

}  // namespace bsrnn::model

#endif  // BSRNN_MODEL_SCHEME_H_
