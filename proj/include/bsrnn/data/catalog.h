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


#ifndef BSRNN_DATA_CATALOG_H_
#define BSRNN_DATA_CATALOG_H_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bsrnn/audio_io.h"

namespace bsrnn::data {

struct EnrollmentEmbedding {
  std::vector<float> vector;
  std::string source_id;

  int dim() const { return static_cast<int>(vector.size()); }
};

// Binary layout: "BSEM", u32 version (1), u32 E, u32 reserved, then E
// little-endian float32 values. Loading L2-normalizes the vector.
EnrollmentEmbedding ReadEmbedding(const std::string& path);
void WriteEmbedding(const std::string& path, const std::vector<float>& v);
// Unit-norm copy; a zero or non-finite vector is a catalog error.
std::vector<float> Normalize(const std::vector<float>& v);
double Cosine(const std::vector<float>& a, const std::vector<float>& b);

enum class SourceKind { kSpeech, kNoise, kRir, kInterferer };
const char* SourceKindName(SourceKind k);

struct CatalogEntry {
  SourceKind kind = SourceKind::kSpeech;
  std::string path;  // resolved against the manifest directory
  std::string speaker_id;
  std::string embedding_path;
  int line = 0;  // 1-based manifest line, 0 for in-memory entries
};

// Sources for simulation. A manifest has one JSON object per line:
//   {"kind": "speech", "path": "a.wav", "speaker_id": "s1",
//    "embedding_path": "a.emb"}
// Blank lines and lines starting with '#' are skipped. Audio is loaded
// lazily and cached.
class Catalog {
 public:
  static Catalog FromFile(const std::string& path);
  // `base_dir` resolves relative paths.
  static Catalog Parse(const std::string& text, const std::string& base_dir);

  // In-memory source, mainly for tests.
  void Add(SourceKind kind, Waveform audio, std::string speaker_id = "",
           std::vector<float> embedding = {});

  std::size_t count(SourceKind kind) const;
  const CatalogEntry& entry(SourceKind kind, std::size_t i) const;
  const Waveform& audio(SourceKind kind, std::size_t i) const;
  // Empty if the entry has none.
  const std::vector<float>& embedding(SourceKind kind, std::size_t i) const;
  // Speech entries sharing the speaker id of speech entry i (i included).
  std::vector<std::size_t> SameSpeaker(std::size_t i) const;

 private:
  struct Source {
    CatalogEntry entry;
    mutable std::unique_ptr<Waveform> audio;
    mutable std::unique_ptr<std::vector<float>> embedding;
  };
  const Source& Get(SourceKind kind, std::size_t i) const;

  std::map<SourceKind, std::vector<std::shared_ptr<Source>>> sources_;
};

// Cleaning segments of an utterance: 3 s pieces, plus a final partial piece
// if it lasts at least 1 s.
int NumCleaningSegments(std::size_t num_samples, int sample_rate);
std::vector<Waveform> CleaningSegments(const Waveform& utterance);

// Indices of the segments whose cosine similarity to the enrollment is at
// least `threshold`.
std::vector<int> CleanSegments(const Waveform& utterance,
                               const EnrollmentEmbedding& enrollment,
                               const std::vector<EnrollmentEmbedding>& segments,
                               double threshold = 0.6);

}  // namespace bsrnn::data

#endif  // BSRNN_DATA_CATALOG_H_
