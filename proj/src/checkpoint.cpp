// Copyright 2026  The bcres Authors
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

// Checkpoint format, little-endian throughout:
//   "BCRK" | version u32 | config | manifest | blob | crc32 u32
// config:   tau f64, n_classes u32, n_mels u32, ssn_sub_bands u32,
//           dropout_p f64, reduce_mode u32, combine_mode u32, step u64
// manifest: count u32, then per tensor: name (u32 length + bytes),
//           shape n,c,h,w u32 each, offset u64 (float index into blob)
// blob:     float count u64, then float32 values (parameters and running
//           norm statistics)
// The CRC covers every byte before it.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "bcres/model.hpp"

namespace bcres {

uint32_t crc32(const uint8_t* data, size_t len) {
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'B', 'C', 'R', 'K'};
constexpr uint32_t kVersion = 1;

struct Writer {
  std::vector<uint8_t> buf;

  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
};

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw IoError("checkpoint: truncated file");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s(buf.begin() + static_cast<long>(pos),
                  buf.begin() + static_cast<long>(pos + n));
    pos += n;
    return s;
  }
};

struct Entry {
  std::string name;
  Tensor<float>* tensor;
};

std::vector<Entry> all_tensors(Model<float>& model) {
  std::vector<Entry> entries;
  model.for_each_param([&](const std::string& name, Tensor<float>& t, bool) {
    entries.push_back({name, &t});
  });
  model.for_each_state(
      [&](const std::string& name, Tensor<float>& t) { entries.push_back({name, &t}); });
  return entries;
}

}  // namespace

void save_checkpoint(Model<float>& model, const std::string& path) {
  const std::vector<Entry> entries = all_tensors(model);

  Writer w;
  w.buf.insert(w.buf.end(), kMagic, kMagic + 4);
  w.u32(kVersion);
  w.f64(model.cfg.tau);
  w.u32(static_cast<uint32_t>(model.cfg.n_classes));
  w.u32(static_cast<uint32_t>(model.cfg.n_mels));
  w.u32(static_cast<uint32_t>(model.cfg.ssn_sub_bands));
  w.f64(model.cfg.dropout_p);
  w.u32(static_cast<uint32_t>(model.cfg.reduce_mode));
  w.u32(static_cast<uint32_t>(model.cfg.combine_mode));
  w.u64(model.step);

  w.u32(static_cast<uint32_t>(entries.size()));
  uint64_t offset = 0;
  for (const Entry& e : entries) {
    w.str(e.name);
    w.u32(static_cast<uint32_t>(e.tensor->n));
    w.u32(static_cast<uint32_t>(e.tensor->c));
    w.u32(static_cast<uint32_t>(e.tensor->h));
    w.u32(static_cast<uint32_t>(e.tensor->w));
    w.u64(offset);
    offset += static_cast<uint64_t>(e.tensor->size());
  }

  w.u64(offset);
  for (const Entry& e : entries)
    for (const float v : e.tensor->data) w.f32(v);

  w.u32(crc32(w.buf.data(), w.buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(w.buf.data()),
            static_cast<std::streamsize>(w.buf.size()));
  if (!out) throw IoError("checkpoint: write failed: " + path);
}

Model<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());

  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw IoError("checkpoint: not a checkpoint file: " + path);
  const uint32_t stored_crc = static_cast<uint32_t>(buf[buf.size() - 4]) |
                              static_cast<uint32_t>(buf[buf.size() - 3]) << 8 |
                              static_cast<uint32_t>(buf[buf.size() - 2]) << 16 |
                              static_cast<uint32_t>(buf[buf.size() - 1]) << 24;
  if (crc32(buf.data(), buf.size() - 4) != stored_crc)
    throw IoError("checkpoint: checksum mismatch (corrupt or truncated): " + path);

  Reader r{buf};
  r.pos = 4;
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw IoError("checkpoint: unsupported format version " + std::to_string(version));

  ModelConfig cfg;
  cfg.tau = r.f64();
  cfg.n_classes = static_cast<int>(r.u32());
  cfg.n_mels = static_cast<int>(r.u32());
  cfg.ssn_sub_bands = static_cast<int>(r.u32());
  cfg.dropout_p = r.f64();
  cfg.reduce_mode = static_cast<ReduceMode>(r.u32());
  cfg.combine_mode = static_cast<CombineMode>(r.u32());
  const uint64_t step = r.u64();

  Rng rng = make_rng(0);  // initial weights are overwritten below
  Model<float> model = Model<float>::build(cfg, rng);
  model.step = step;

  std::map<std::string, Tensor<float>*> by_name;
  for (const Entry& e : all_tensors(model)) by_name[e.name] = e.tensor;

  struct ManifestRow {
    std::string name;
    int n, c, h, w;
    uint64_t offset;
  };
  const uint32_t count = r.u32();
  std::vector<ManifestRow> rows;
  rows.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    ManifestRow row;
    row.name = r.str();
    row.n = static_cast<int>(r.u32());
    row.c = static_cast<int>(r.u32());
    row.h = static_cast<int>(r.u32());
    row.w = static_cast<int>(r.u32());
    row.offset = r.u64();
    rows.push_back(std::move(row));
  }

  const uint64_t blob_count = r.u64();
  const size_t blob_start = r.pos;
  r.need(blob_count * 4);

  for (const ManifestRow& row : rows) {
    const auto it = by_name.find(row.name);
    if (it == by_name.end())
      throw IoError("checkpoint: unknown tensor in manifest: " + row.name);
    Tensor<float>& t = *it->second;
    if (t.n != row.n || t.c != row.c || t.h != row.h || t.w != row.w)
      throw IoError("checkpoint: shape mismatch for " + row.name);
    if (row.offset + static_cast<uint64_t>(t.size()) > blob_count)
      throw IoError("checkpoint: blob overrun for " + row.name);
    r.pos = blob_start + row.offset * 4;
    for (int64_t i = 0; i < t.size(); ++i) t.data[static_cast<size_t>(i)] = r.f32();
  }
  return model;
}

}  // namespace bcres
