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

#include "bsrnn/model/checkpoint.h"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "bsrnn/error.h"

namespace bsrnn::model {

namespace {

constexpr char kMagic[8] = {'B', 'S', 'R', 'N', 'N', 'C', 'K', 'P'};

class Writer {
 public:
  void Bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void U32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back((v >> (8 * i)) & 0xff);
  }
  void U64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back((v >> (8 * i)) & 0xff);
  }
  void F32(float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    U32(u);
  }
  std::vector<unsigned char>& buf() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& b, std::size_t end) : b_(b), end_(end) {}
  void Need(std::size_t n) {
    BSRNN_CHECK(pos_ + n <= end_, ErrorKind::kCheckpoint, "truncated checkpoint");
  }
  uint32_t U32() {
    Need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t U64() {
    Need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float F32() {
    const uint32_t u = U32();
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  std::string Str(std::size_t n) {
    Need(n);
    std::string s(b_.begin() + pos_, b_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<unsigned char>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

uint32_t Crc(const unsigned char* p, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<uint32_t>(c);
}

bool IsAuxiliary(const std::string& name) {
  return name.rfind("adam.", 0) == 0 || name.rfind("disc.", 0) == 0;
}

}  // namespace

const NamedTensor* Checkpoint::Find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void Checkpoint::Put(const std::string& name, const nn::Var& v) {
  NamedTensor t;
  t.name = name;
  t.shape = v.shape();
  t.data.assign(v.value().begin(), v.value().end());
  Put(std::move(t));
}

void Checkpoint::Put(NamedTensor t) {
  for (auto& existing : tensors) {
    if (existing.name == t.name) {
      existing = std::move(t);
      return;
    }
  }
  tensors.push_back(std::move(t));
}

std::vector<unsigned char> EncodeCheckpoint(const Checkpoint& ckpt) {
  Writer w;
  w.Bytes(kMagic, 8);
  w.U32(kCheckpointVersion);
  const std::string meta = ckpt.meta.dump();
  w.U32(static_cast<uint32_t>(meta.size()));
  w.Bytes(meta.data(), meta.size());
  w.U32(static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    BSRNN_CHECK(static_cast<int64_t>(t.data.size()) == nn::NumElements(t.shape),
                ErrorKind::kCheckpoint, "tensor " + t.name + " has wrong size");
    w.U32(static_cast<uint32_t>(t.name.size()));
    w.Bytes(t.name.data(), t.name.size());
    w.U32(static_cast<uint32_t>(t.shape.size()));
    for (int64_t d : t.shape) w.U64(static_cast<uint64_t>(d));
    for (float f : t.data) w.F32(f);
  }
  const uint32_t crc = Crc(w.buf().data(), w.buf().size());
  w.U32(crc);
  return std::move(w.buf());
}

Checkpoint DecodeCheckpoint(const std::vector<unsigned char>& bytes) {
  BSRNN_CHECK(bytes.size() >= 8 + 4 + 4 + 4 + 4, ErrorKind::kCheckpoint,
              "checkpoint too short");
  BSRNN_CHECK(std::memcmp(bytes.data(), kMagic, 8) == 0, ErrorKind::kCheckpoint,
              "not a checkpoint file");
  const std::size_t body = bytes.size() - 4;
  uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<uint32_t>(bytes[body + i]) << (8 * i);
  BSRNN_CHECK(stored == Crc(bytes.data(), body), ErrorKind::kCheckpoint,
              "checksum mismatch");

  Reader r(bytes, body);
  r.Str(8);
  const uint32_t version = r.U32();
  BSRNN_CHECK(version == kCheckpointVersion, ErrorKind::kCheckpoint,
              "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const uint32_t meta_len = r.U32();
  try {
    ckpt.meta = nlohmann::json::parse(r.Str(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kCheckpoint, std::string("bad metadata: ") + e.what());
  }
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.Str(r.U32());
    const uint32_t rank = r.U32();
    BSRNN_CHECK(rank <= 8, ErrorKind::kCheckpoint, "implausible rank for " + t.name);
    for (uint32_t d = 0; d < rank; ++d) t.shape.push_back(static_cast<int64_t>(r.U64()));
    const int64_t n = nn::NumElements(t.shape);
    r.Need(static_cast<std::size_t>(n) * 4);
    t.data.resize(n);
    for (int64_t j = 0; j < n; ++j) t.data[j] = r.F32();
    ckpt.tensors.push_back(std::move(t));
  }
  BSRNN_CHECK(r.pos() == body, ErrorKind::kCheckpoint, "trailing bytes in checkpoint");
  return ckpt;
}

void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = EncodeCheckpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    BSRNN_CHECK(f.good(), ErrorKind::kIo, "cannot write " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    BSRNN_CHECK(f.good(), ErrorKind::kIo, "write failed for " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  BSRNN_CHECK(!ec, ErrorKind::kIo, "cannot move checkpoint into " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  BSRNN_CHECK(f.good(), ErrorKind::kIo, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  return DecodeCheckpoint(bytes);
}

Checkpoint CheckpointFromModel(const Model& m) {
  Checkpoint c;
  c.meta["model"] = m.config().ToJson();
  for (const auto& name : m.params().names()) c.Put(name, m.params().Get(name));
  return c;
}

void LoadModelTensors(Model& m, const Checkpoint& ckpt) {
  for (const auto& name : m.params().names()) {
    const NamedTensor* t = ckpt.Find(name);
    BSRNN_CHECK(t != nullptr, ErrorKind::kCheckpoint, "missing tensor " + name);
    nn::Var v = m.params().Get(name);
    BSRNN_CHECK(t->shape == v.shape(), ErrorKind::kCheckpoint,
                "shape mismatch for " + name + ": file " + nn::ShapeString(t->shape) +
                    ", model " + nn::ShapeString(v.shape()));
    std::copy(t->data.begin(), t->data.end(), v.mutable_value().begin());
  }
  for (const auto& t : ckpt.tensors) {
    BSRNN_CHECK(m.params().Has(t.name) || IsAuxiliary(t.name),
                ErrorKind::kCheckpoint, "unexpected tensor " + t.name);
  }
}

std::unique_ptr<Model> ModelFromCheckpoint(const Checkpoint& ckpt) {
  BSRNN_CHECK(ckpt.meta.contains("model"), ErrorKind::kCheckpoint,
              "checkpoint has no model config");
  ModelConfig cfg;
  try {
    cfg = ModelConfig::FromJson(ckpt.meta.at("model"));
  } catch (const Error& e) {
    throw Error(ErrorKind::kCheckpoint, e.what());
  }
  auto m = std::make_unique<Model>(cfg);
  LoadModelTensors(*m, ckpt);
  return m;
}

}  // namespace bsrnn::model
