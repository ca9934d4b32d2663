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

#include "bsrnn/data/catalog.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsrnn/error.h"
#include "json.hpp"

namespace bsrnn::data {

namespace {

constexpr char kEmbMagic[4] = {'B', 'S', 'E', 'M'};
constexpr uint32_t kEmbVersion = 1;

uint32_t ReadU32(const unsigned char* p) {
  return uint32_t{p[0]} | uint32_t{p[1]} << 8 | uint32_t{p[2]} << 16 |
         uint32_t{p[3]} << 24;
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i)));
}

}  // namespace

std::vector<float> Normalize(const std::vector<float>& v) {
  double n = 0.0;
  for (float x : v) n += double{x} * x;
  BSRNN_CHECK(std::isfinite(n) && n > 0.0, ErrorKind::kCatalog,
              "embedding must be finite with nonzero norm");
  const double inv = 1.0 / std::sqrt(n);
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] * inv);
  return out;
}

double Cosine(const std::vector<float>& a, const std::vector<float>& b) {
  BSRNN_CHECK(a.size() == b.size() && !a.empty(), ErrorKind::kCatalog,
              "embedding dimensions differ");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double{a[i]} * b[i];
    aa += double{a[i]} * a[i];
    bb += double{b[i]} * b[i];
  }
  BSRNN_CHECK(aa > 0 && bb > 0, ErrorKind::kCatalog, "zero embedding");
  return ab / std::sqrt(aa * bb);
}

EnrollmentEmbedding ReadEmbedding(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  BSRNN_CHECK(in.good(), ErrorKind::kIo, "cannot open embedding " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  BSRNN_CHECK(bytes.size() >= 16 && std::memcmp(bytes.data(), kEmbMagic, 4) == 0,
              ErrorKind::kFormat, "not an embedding file: " + path);
  BSRNN_CHECK(ReadU32(bytes.data() + 4) == kEmbVersion, ErrorKind::kFormat,
              "unsupported embedding version in " + path);
  const uint32_t dim = ReadU32(bytes.data() + 8);
  BSRNN_CHECK(dim > 0 && bytes.size() == 16 + 4 * std::size_t{dim}, ErrorKind::kFormat,
              "embedding size does not match its header: " + path);
  std::vector<float> v(dim);
  for (uint32_t i = 0; i < dim; ++i) {
    const uint32_t bits = ReadU32(bytes.data() + 16 + 4 * i);
    std::memcpy(&v[i], &bits, 4);
  }
  return {Normalize(v), std::filesystem::path(path).stem().string()};
}

void WriteEmbedding(const std::string& path, const std::vector<float>& v) {
  std::string out(kEmbMagic, 4);
  PutU32(out, kEmbVersion);
  PutU32(out, static_cast<uint32_t>(v.size()));
  PutU32(out, 0);
  for (float x : v) {
    uint32_t bits;
    std::memcpy(&bits, &x, 4);
    PutU32(out, bits);
  }
  std::ofstream f(path, std::ios::binary);
  BSRNN_CHECK(f.good(), ErrorKind::kIo, "cannot write embedding " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  BSRNN_CHECK(f.good(), ErrorKind::kIo, "write failed: " + path);
}

const char* SourceKindName(SourceKind k) {
  switch (k) {
    case SourceKind::kSpeech: return "speech";
    case SourceKind::kNoise: return "noise";
    case SourceKind::kRir: return "rir";
    case SourceKind::kInterferer: return "interferer";
  }
  return "?";
}

Catalog Catalog::FromFile(const std::string& path) {
  std::ifstream in(path);
  BSRNN_CHECK(in.good(), ErrorKind::kIo, "cannot open catalog " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str(), std::filesystem::path(path).parent_path().string());
}

Catalog Catalog::Parse(const std::string& text, const std::string& base_dir) {
  Catalog c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return (fp.is_absolute() || base_dir.empty() ? fp : std::filesystem::path(base_dir) / fp)
        .string();
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = "catalog line " + std::to_string(lineno) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kCatalog, where + "invalid JSON: " + e.what());
    }
    BSRNN_CHECK(j.is_object(), ErrorKind::kCatalog, where + "expected an object");
    for (const auto& [key, value] : j.items()) {
      BSRNN_CHECK(key == "kind" || key == "path" || key == "speaker_id" ||
                      key == "embedding_path",
                  ErrorKind::kCatalog, where + "unknown field '" + key + "'");
      BSRNN_CHECK(value.is_string(), ErrorKind::kCatalog,
                  where + "field '" + key + "' must be a string");
    }
    BSRNN_CHECK(j.contains("kind") && j.contains("path"), ErrorKind::kCatalog,
                where + "needs 'kind' and 'path'");
    const std::string kind = j["kind"];
    CatalogEntry e;
    if (kind == "speech") {
      e.kind = SourceKind::kSpeech;
    } else if (kind == "noise") {
      e.kind = SourceKind::kNoise;
    } else if (kind == "rir") {
      e.kind = SourceKind::kRir;
    } else if (kind == "interferer") {
      e.kind = SourceKind::kInterferer;
    } else {
      throw Error(ErrorKind::kCatalog, where + "unknown kind '" + kind + "'");
    }
    e.path = resolve(j["path"]);
    e.speaker_id = j.value("speaker_id", "");
    if (j.contains("embedding_path")) e.embedding_path = resolve(j["embedding_path"]);
    e.line = lineno;
    auto src = std::make_shared<Source>();
    src->entry = e;
    c.sources_[e.kind].push_back(std::move(src));
  }
  return c;
}

void Catalog::Add(SourceKind kind, Waveform audio, std::string speaker_id,
                  std::vector<float> embedding) {
  auto src = std::make_shared<Source>();
  src->entry.kind = kind;
  src->entry.speaker_id = std::move(speaker_id);
  src->audio = std::make_unique<Waveform>(std::move(audio));
  src->embedding = std::make_unique<std::vector<float>>(
      embedding.empty() ? embedding : Normalize(embedding));
  sources_[kind].push_back(std::move(src));
}

std::size_t Catalog::count(SourceKind kind) const {
  auto it = sources_.find(kind);
  return it == sources_.end() ? 0 : it->second.size();
}

const Catalog::Source& Catalog::Get(SourceKind kind, std::size_t i) const {
  BSRNN_CHECK(i < count(kind), ErrorKind::kCatalog,
              std::string("no ") + SourceKindName(kind) + " entry " + std::to_string(i));
  return *sources_.at(kind)[i];
}

const CatalogEntry& Catalog::entry(SourceKind kind, std::size_t i) const {
  return Get(kind, i).entry;
}

const Waveform& Catalog::audio(SourceKind kind, std::size_t i) const {
  const Source& s = Get(kind, i);
  if (!s.audio) {
    try {
      s.audio = std::make_unique<Waveform>(ReadWav(s.entry.path));
    } catch (const Error& e) {
      throw Error(ErrorKind::kCatalog,
                  "catalog line " + std::to_string(s.entry.line) + ": " + e.what());
    }
  }
  return *s.audio;
}

const std::vector<float>& Catalog::embedding(SourceKind kind, std::size_t i) const {
  const Source& s = Get(kind, i);
  if (!s.embedding) {
    std::vector<float> v;
    if (!s.entry.embedding_path.empty()) {
      try {
        v = ReadEmbedding(s.entry.embedding_path).vector;
      } catch (const Error& e) {
        throw Error(ErrorKind::kCatalog,
                    "catalog line " + std::to_string(s.entry.line) + ": " + e.what());
      }
    }
    s.embedding = std::make_unique<std::vector<float>>(std::move(v));
  }
  return *s.embedding;
}

std::vector<std::size_t> Catalog::SameSpeaker(std::size_t i) const {
  const std::string& id = entry(SourceKind::kSpeech, i).speaker_id;
  if (id.empty()) return {i};
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count(SourceKind::kSpeech); ++k) {
    if (entry(SourceKind::kSpeech, k).speaker_id == id) out.push_back(k);
  }
  return out;
}

int NumCleaningSegments(std::size_t num_samples, int sample_rate) {
  const std::size_t seg = 3 * static_cast<std::size_t>(sample_rate);
  const std::size_t full = num_samples / seg;
  const std::size_t rest = num_samples - full * seg;
  return static_cast<int>(full + (rest >= static_cast<std::size_t>(sample_rate) ? 1 : 0));
}

std::vector<Waveform> CleaningSegments(const Waveform& utterance) {
  const std::size_t seg = 3 * static_cast<std::size_t>(utterance.sample_rate);
  const int n = NumCleaningSegments(utterance.size(), utterance.sample_rate);
  std::vector<Waveform> out;
  for (int k = 0; k < n; ++k) {
    const std::size_t b = k * seg;
    const std::size_t e = std::min(utterance.size(), b + seg);
    out.emplace_back(std::vector<float>(utterance.samples.begin() + b,
                                        utterance.samples.begin() + e),
                     utterance.sample_rate);
  }
  return out;
}

std::vector<int> CleanSegments(const Waveform& utterance,
                               const EnrollmentEmbedding& enrollment,
                               const std::vector<EnrollmentEmbedding>& segments,
                               double threshold) {
  const int n = NumCleaningSegments(utterance.size(), utterance.sample_rate);
  BSRNN_CHECK(static_cast<int>(segments.size()) == n, ErrorKind::kCatalog,
              "utterance has " + std::to_string(n) + " segments but " +
                  std::to_string(segments.size()) + " embeddings were given");
  std::vector<int> keep;
  for (int k = 0; k < n; ++k) {
    if (Cosine(segments[k].vector, enrollment.vector) >= threshold) keep.push_back(k);
  }
  return keep;
}

}  // namespace bsrnn::data
