// Copyright 2026 The lnx Authors. All Rights Reserved.
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

#include "lnx/codec/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <zlib.h>

#include "lnx/codec/range_coder.hpp"
#include <json.hpp>

namespace lnx {
namespace {

enum class Part { coded, tables, decoders, raw, header };

class Writer {
 public:
  void u8(std::uint8_t v, Part p = Part::header) { put(&v, 1, p); }
  void u16(std::uint16_t v, Part p = Part::header) { le(v, 2, p); }
  void u32(std::uint32_t v, Part p = Part::header) { le(v, 4, p); }
  void i32(std::int32_t v, Part p = Part::header) { le(static_cast<std::uint32_t>(v), 4, p); }
  void u64(std::uint64_t v, Part p = Part::header) { le(v, 8, p); }
  void f32(float v, Part p) { u32(std::bit_cast<std::uint32_t>(v), p); }
  /// LEB128.
  void var(std::uint64_t v, Part p = Part::header) {
    do {
      const auto b = static_cast<std::uint8_t>((v & 0x7F) | (v > 0x7F ? 0x80 : 0));
      put(&b, 1, p);
      v >>= 7;
    } while (v);
  }
  /// Zigzag, then LEB128.
  void svar(std::int64_t v, Part p = Part::header) {
    var((static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63), p);
  }
  void bytes(std::span<const std::uint8_t> b, Part p = Part::header) { put(b.data(), b.size(), p); }
  std::vector<std::uint8_t>& out() { return out_; }

 private:
  void le(std::uint64_t v, int n, Part p) {
    for (int i = 0; i < n; ++i) {
      const auto b = static_cast<std::uint8_t>(v >> (8 * i));
      put(&b, 1, p);
    }
  }
  void put(const std::uint8_t* b, std::size_t n, Part) { out_.insert(out_.end(), b, b + n); }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, SizeBreakdown* tally) : bytes_(bytes), tally_(tally) {}

  std::uint8_t u8(Part p = Part::header) { return static_cast<std::uint8_t>(le(1, p)); }
  std::uint16_t u16(Part p = Part::header) { return static_cast<std::uint16_t>(le(2, p)); }
  std::uint32_t u32(Part p = Part::header) { return static_cast<std::uint32_t>(le(4, p)); }
  std::int32_t i32(Part p = Part::header) { return static_cast<std::int32_t>(u32(p)); }
  std::uint64_t u64(Part p = Part::header) { return le(8, p); }
  float f32(Part p) { return std::bit_cast<float>(u32(p)); }
  std::uint64_t var(Part p = Part::header) {
    std::uint64_t v = 0;
    for (int shift = 0;; shift += 7) {
      if (shift > 63) throw FormatError("lnx: malformed integer at byte offset " + std::to_string(pos_));
      const std::uint8_t b = u8(p);
      v |= std::uint64_t{b & 0x7Fu} << shift;
      if (!(b & 0x80)) return v;
    }
  }
  std::int64_t svar(Part p = Part::header) {
    const std::uint64_t z = var(p);
    return static_cast<std::int64_t>(z >> 1) ^ -static_cast<std::int64_t>(z & 1);
  }
  /// var() that must fit in `limit`.
  std::uint32_t count(std::uint64_t limit, const char* what) {
    const std::size_t at = pos_;
    const std::uint64_t v = var();
    if (v > limit) throw FormatError(std::string("lnx: implausible ") + what + " at byte offset " + std::to_string(at));
    return static_cast<std::uint32_t>(v);
  }
  std::span<const std::uint8_t> bytes(std::size_t n, Part p = Part::header) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    tally(n, p);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) {
      throw FormatError("lnx: truncated file at byte offset " + std::to_string(pos_));
    }
  }
  void tally(std::size_t n, Part p) {
    if (!tally_) return;
    const auto k = static_cast<std::int64_t>(n);
    switch (p) {
      case Part::coded: tally_->coded += k; break;
      case Part::tables: tally_->tables += k; break;
      case Part::decoders: tally_->decoders += k; break;
      case Part::raw: tally_->raw += k; break;
      case Part::header: tally_->header += k; break;
    }
  }
  std::uint64_t le(int n, Part p) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    tally(static_cast<std::size_t>(n), p);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  SizeBreakdown* tally_;
};

constexpr std::size_t kLengthOffset = 8;
constexpr std::uint64_t kMaxDescriptor = 1u << 24;

// Raw deflate (no zlib/gzip wrapper) at the maximum level.
std::vector<std::uint8_t> deflate_bytes(std::string_view text) {
  z_stream z{};
  if (deflateInit2(&z, Z_BEST_COMPRESSION, Z_DEFLATED, -15, 9, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error("zlib: deflateInit failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&z, static_cast<uLong>(text.size())));
  z.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(text.data()));
  z.avail_in = static_cast<uInt>(text.size());
  z.next_out = out.data();
  z.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&z, Z_FINISH);
  out.resize(z.total_out);
  deflateEnd(&z);
  if (rc != Z_STREAM_END) throw Error("zlib: deflate failed");
  return out;
}

std::string inflate_bytes(std::span<const std::uint8_t> packed, std::size_t size) {
  std::string out(size, '\0');
  z_stream z{};
  if (inflateInit2(&z, -15) != Z_OK) throw Error("zlib: inflateInit failed");
  z.next_in = const_cast<Bytef*>(packed.data());
  z.avail_in = static_cast<uInt>(packed.size());
  z.next_out = reinterpret_cast<Bytef*>(out.data());
  z.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&z, Z_FINISH);
  const bool whole = rc == Z_STREAM_END && z.total_out == size && z.avail_in == 0;
  inflateEnd(&z);
  if (!whole) throw FormatError("lnx: corrupt architecture descriptor");
  return out;
}

std::size_t raw_length(const LayerSpec& spec, RawField field) {
  switch (field) {
    case RawField::weight:
      return spec.has_weight() ? static_cast<std::size_t>(spec.out_channels * spec.in_channels *
                                                          spec.slice_length())
                               : 0;
    case RawField::bias: return spec.has_weight() && spec.bias ? static_cast<std::size_t>(spec.out_channels) : 0;
    default:
      return spec.kind == LayerKind::batchnorm ? static_cast<std::size_t>(spec.in_channels) : 0;
  }
}

CompressedModel parse(std::span<const std::uint8_t> file, SizeBreakdown* tally) {
  if (file.size() < 4 || std::memcmp(file.data(), kLnxMagic, 4) != 0) {
    throw FormatError("lnx: bad magic (not an .lnx file)");
  }
  if (file.size() < 4 + 4 + 8 + 4) throw FormatError("lnx: truncated file at byte offset 4");
  Reader in(file, tally);
  (void)in.bytes(4);
  const std::uint16_t version = in.u16();
  if (version != kLnxVersion) {
    throw FormatError("lnx: unsupported format version " + std::to_string(version));
  }
  (void)in.u16();
  const std::uint64_t declared = in.u64();
  if (declared != file.size()) {
    throw FormatError("lnx: header declares " + std::to_string(declared) + " bytes, file has " +
                      std::to_string(file.size()));
  }
  const std::size_t body = file.size() - 4;
  std::uint32_t stored = 0;
  for (int b = 0; b < 4; ++b) stored |= std::uint32_t{file[body + static_cast<std::size_t>(b)]} << (8 * b);
  if (crc32(file.first(body)) != stored) throw FormatError("lnx: file checksum mismatch");

  CompressedModel m;
  const std::uint32_t json_len = in.count(kMaxDescriptor, "descriptor length");
  const std::uint32_t packed_len = in.count(in.remaining(), "descriptor length");
  const std::string json = inflate_bytes(in.bytes(packed_len), json_len);
  m.arch = Architecture::from_json(json);
  std::vector<Shape3> shapes;
  try {
    shapes = m.arch.infer_shapes();
  } catch (const Error& e) {
    throw FormatError(std::string("lnx: invalid architecture: ") + e.what());
  }
  const std::size_t layers = m.arch.layers.size();

  const std::uint32_t group_count = in.count(layers, "group count");
  for (std::uint32_t g = 0; g < group_count; ++g) {
    CompressedGroup grp;
    const std::uint8_t kind = in.u8();
    if (kind != static_cast<std::uint8_t>(LayerKind::conv2d) && kind != static_cast<std::uint8_t>(LayerKind::dense)) {
      throw FormatError("lnx: group " + std::to_string(g) + " has invalid kind " + std::to_string(kind));
    }
    grp.kind = static_cast<LayerKind>(kind);
    grp.kernel = in.count(1024, "kernel size");
    grp.slice_length = in.count(1024 * 1024, "slice length");
    const Index expect = grp.kind == LayerKind::conv2d ? grp.kernel * grp.kernel : 1;
    if (grp.slice_length != expect || grp.slice_length < 1 || grp.slice_length > 1024) {
      throw FormatError("lnx: group " + std::to_string(g) + " has inconsistent slice length");
    }
    const auto name = in.bytes(in.count(256, "name length"));
    grp.name.assign(name.begin(), name.end());
    grp.psi.resize(grp.slice_length, grp.slice_length);
    for (Index k = 0; k < grp.psi.size(); ++k) grp.psi.data()[k] = in.f32(Part::decoders);
    const std::uint64_t channels = in.var(Part::tables);
    if (channels != static_cast<std::uint32_t>(grp.slice_length)) {
      throw FormatError("lnx: group " + std::to_string(g) + " table has " + std::to_string(channels) +
                        " channels for slice length " + std::to_string(grp.slice_length));
    }
    for (std::uint64_t c = 0; c < channels; ++c) {
      PmfChannel ch;
      const std::int64_t min_symbol = in.svar(Part::tables);
      const std::uint64_t n = in.var(Part::tables);
      if (n > in.remaining() || n > PmfTable::kTotal) {
        throw FormatError("lnx: truncated table at byte offset " + std::to_string(in.position()));
      }
      if (min_symbol < INT32_MIN || min_symbol + static_cast<std::int64_t>(n) > INT32_MAX) {
        throw FormatError("lnx: group " + std::to_string(g) + " table support out of range");
      }
      ch.min_symbol = static_cast<std::int32_t>(min_symbol);
      ch.frequencies.resize(n);
      for (auto& f : ch.frequencies) {
        const std::uint64_t v = in.var(Part::tables);
        if (v > 0xFFFF) throw FormatError("lnx: group " + std::to_string(g) + " table frequency out of range");
        f = static_cast<std::uint16_t>(v);
      }
      grp.table.channels.push_back(std::move(ch));
    }
    try {
      validate_pmf_table(grp.table);
    } catch (const Error& e) {
      throw FormatError("lnx: group " + std::to_string(g) + ": " + e.what());
    }
    m.groups.push_back(std::move(grp));
  }

  std::set<std::uint32_t> coded_layers;
  const std::uint32_t tensor_count = in.count(layers, "tensor count");
  for (std::uint32_t t = 0; t < tensor_count; ++t) {
    CompressedTensor ct;
    ct.layer = in.count(layers, "layer index");
    ct.group = in.count(layers, "group index");
    ct.rows = static_cast<Index>(in.count(UINT32_MAX, "row count"));
    ct.cols = in.count(1024 * 1024, "column count");
    if (ct.layer >= layers || ct.group >= m.groups.size() || !coded_layers.insert(ct.layer).second) {
      throw FormatError("lnx: tensor " + std::to_string(t) + " has an invalid layer or group");
    }
    const LayerSpec& spec = m.arch.layers[ct.layer];
    const CompressedGroup& grp = m.groups[ct.group];
    const Index kernel = spec.kind == LayerKind::conv2d ? spec.kernel : 1;
    if (!spec.has_weight() || spec.kind != grp.kind || kernel != grp.kernel ||
        ct.rows != spec.out_channels * spec.in_channels || ct.cols != grp.slice_length) {
      throw FormatError("lnx: tensor " + std::to_string(t) + " does not match layer " +
                        std::to_string(ct.layer));
    }
    const std::uint32_t n = in.count(in.remaining(), "stream length");
    if (n < kTensorTrailerBytes) throw FormatError("lnx: tensor " + std::to_string(t) + " stream too short");
    const auto payload = in.bytes(n - kTensorTrailerBytes, Part::coded);
    const auto trailer = in.bytes(kTensorTrailerBytes);
    ct.stream.assign(payload.begin(), payload.end());
    ct.stream.insert(ct.stream.end(), trailer.begin(), trailer.end());
    m.tensors.push_back(std::move(ct));
  }

  std::set<std::pair<std::uint32_t, RawField>> present;
  const std::uint32_t raw_count = in.count(6 * layers, "raw tensor count");
  for (std::uint32_t r = 0; r < raw_count; ++r) {
    RawTensor rt;
    rt.layer = in.count(layers, "layer index");
    const std::uint8_t field = in.u8();
    if (rt.layer >= layers || field > static_cast<std::uint8_t>(RawField::running_var)) {
      throw FormatError("lnx: raw tensor " + std::to_string(r) + " has an invalid layer or field");
    }
    rt.field = static_cast<RawField>(field);
    const std::uint32_t n = in.count(in.remaining(), "raw length");
    const std::size_t expect = raw_length(m.arch.layers[rt.layer], rt.field);
    if (expect == 0 || n != expect) {
      throw FormatError("lnx: raw tensor " + std::to_string(r) + " has the wrong length for layer " +
                        std::to_string(rt.layer));
    }
    const bool coded_weight = rt.field == RawField::weight && coded_layers.count(rt.layer);
    if (coded_weight || !present.insert({rt.layer, rt.field}).second) {
      throw FormatError("lnx: raw tensor " + std::to_string(r) + " duplicates a stored parameter of layer " +
                        std::to_string(rt.layer));
    }
    rt.values.resize(n);
    for (float& v : rt.values) v = in.f32(Part::raw);
    m.raw.push_back(std::move(rt));
  }
  for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(layers); ++i) {
    for (auto f : {RawField::weight, RawField::bias, RawField::gamma, RawField::beta,
                   RawField::running_mean, RawField::running_var}) {
      if (f == RawField::weight && coded_layers.count(i)) continue;
      if (raw_length(m.arch.layers[i], f) > 0 && !present.count({i, f})) {
        throw FormatError("lnx: layer " + std::to_string(i) + " is missing stored parameters");
      }
    }
  }
  (void)in.u32();  // checksum, verified above
  if (in.remaining() != 0) throw FormatError("lnx: trailing bytes after checksum");
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const CompressedModel& m) {
  Writer w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kLnxMagic), 4));
  w.u16(kLnxVersion);
  w.u16(0);
  w.u64(0);  // patched below
  const std::string json = m.arch.to_json();
  const auto packed = deflate_bytes(json);
  w.var(json.size());
  w.var(packed.size());
  w.bytes(packed);

  w.var(m.groups.size());
  for (const CompressedGroup& g : m.groups) {
    if (g.psi.rows() != g.slice_length || g.psi.cols() != g.slice_length ||
        static_cast<Index>(g.table.channels.size()) != g.slice_length) {
      throw ShapeError("serialize_model: group '" + g.name + "' decoder/table do not match its slice length");
    }
    w.u8(static_cast<std::uint8_t>(g.kind));
    w.var(static_cast<std::uint64_t>(g.kernel));
    w.var(static_cast<std::uint64_t>(g.slice_length));
    w.var(g.name.size());
    w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(g.name.data()), g.name.size()));
    for (Index k = 0; k < g.psi.size(); ++k) w.f32(g.psi.data()[k], Part::decoders);
    w.var(g.table.channels.size(), Part::tables);
    for (const PmfChannel& ch : g.table.channels) {
      w.svar(ch.min_symbol, Part::tables);
      w.var(ch.frequencies.size(), Part::tables);
      for (std::uint16_t f : ch.frequencies) w.var(f, Part::tables);
    }
  }

  w.var(m.tensors.size());
  for (const CompressedTensor& t : m.tensors) {
    w.var(t.layer);
    w.var(t.group);
    w.var(static_cast<std::uint64_t>(t.rows));
    w.var(static_cast<std::uint64_t>(t.cols));
    w.var(t.stream.size());
    w.bytes(t.stream);
  }

  w.var(m.raw.size());
  for (const RawTensor& r : m.raw) {
    w.var(r.layer);
    w.u8(static_cast<std::uint8_t>(r.field));
    w.var(r.values.size());
    for (float v : r.values) w.f32(v, Part::raw);
  }

  auto& out = w.out();
  const std::uint64_t total = out.size() + 4;
  for (int i = 0; i < 8; ++i) out[kLengthOffset + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(total >> (8 * i));
  w.u32(crc32(out));
  return std::move(out);
}

CompressedModel deserialize_model(std::span<const std::uint8_t> bytes) { return parse(bytes, nullptr); }

SizeBreakdown report_size(std::span<const std::uint8_t> file) {
  SizeBreakdown s;
  const CompressedModel m = parse(file, &s);
  s.total = static_cast<std::int64_t>(file.size());
  s.dense_parameters = dense_parameter_count(m.arch);
  return s;
}

std::string SizeBreakdown::to_json() const {
  nlohmann::ordered_json j;
  j["unit"] = "bytes";
  j["coded"] = coded;
  j["tables"] = tables;
  j["decoders"] = decoders;
  j["raw"] = raw;
  j["header"] = header;
  j["total"] = total;
  j["dense_parameters"] = dense_parameters;
  j["dense_bytes"] = dense_bytes();
  j["compression_ratio"] = compression_ratio();
  return j.dump(2);
}

std::vector<PmfTable> freeze_tables(const LatentModel<float>& model,
                                    const std::vector<FactorizedDensity>& densities) {
  if (densities.size() != model.groups.size()) {
    throw ShapeError("freeze_tables: need one density per parameter group");
  }
  std::vector<PmfTable> tables;
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    std::vector<IntMatrix> rounded;
    for (int idx : model.groups[g].members) rounded.push_back(model.latents[static_cast<std::size_t>(idx)].rounded());
    std::vector<const IntMatrix*> ptrs;
    for (const auto& r : rounded) ptrs.push_back(&r);
    const auto support = observed_symbol_range(ptrs, model.groups[g].slice_length);
    tables.push_back(build_pmf_table(densities[g], support));
  }
  return tables;
}

CompressedModel compress_model(const LatentModel<float>& model, const std::vector<PmfTable>& tables) {
  if (tables.size() != model.groups.size()) {
    throw ShapeError("compress_model: need one table per parameter group");
  }
  CompressedModel c;
  c.arch = model.arch;
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const ParameterGroup& grp = model.groups[g];
    c.groups.push_back({grp.name, grp.kind, grp.kernel, grp.slice_length, model.psi[g], tables[g]});
    for (int idx : grp.members) {
      const auto& latent = model.latents[static_cast<std::size_t>(idx)];
      c.tensors.push_back({static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(g), latent.rows(),
                           latent.slice_length(), encode_tensor(latent.rounded(), tables[g])});
    }
  }
  auto raw = [&](std::size_t layer, RawField field, const auto& values) {
    if (values.size() == 0) return;
    c.raw.push_back({static_cast<std::uint32_t>(layer), field,
                     std::vector<float>(values.data(), values.data() + values.size())});
  };
  for (std::size_t i = 0; i < model.arch.layers.size(); ++i) {
    const LayerParams<float>& p = model.params.layers[i];
    if (model.arch.layers[i].has_weight() && !model.compressed(i)) raw(i, RawField::weight, p.weight);
    raw(i, RawField::bias, p.bias);
    raw(i, RawField::gamma, p.gamma);
    raw(i, RawField::beta, p.beta);
    raw(i, RawField::running_mean, p.running_mean);
    raw(i, RawField::running_var, p.running_var);
  }
  return c;
}

LatentModel<float> decompress_model(const CompressedModel& c) {
  LatentModel<float> m;
  m.arch = c.arch;
  const std::size_t layers = c.arch.layers.size();
  m.params = make_params<float>(c.arch);
  m.group_of.assign(layers, -1);
  m.latents.resize(layers);
  for (const CompressedGroup& g : c.groups) {
    ParameterGroup pg;
    pg.name = g.name;
    pg.kind = g.kind;
    pg.kernel = g.kernel;
    pg.slice_length = g.slice_length;
    m.groups.push_back(std::move(pg));
    m.psi.push_back(g.psi);
  }
  for (const CompressedTensor& t : c.tensors) {
    const LayerSpec& spec = c.arch.layers[t.layer];
    const IntMatrix latent = decode_tensor(t.stream, c.groups[t.group].table, t.rows, t.cols);
    LatentTensor<float> lt = make_latent<float>(spec);
    lt.surrogate = latent.cast<float>();
    m.latents[t.layer] = std::move(lt);
    m.group_of[t.layer] = static_cast<int>(t.group);
    m.groups[t.group].members.push_back(static_cast<int>(t.layer));
  }
  for (auto& g : m.groups) std::sort(g.members.begin(), g.members.end());

  std::vector<std::set<RawField>> present(layers);
  for (const RawTensor& r : c.raw) {
    LayerParams<float>& p = m.params.layers[r.layer];
    auto fill = [&](auto& dst) {
      std::copy(r.values.begin(), r.values.end(), dst.data());
    };
    switch (r.field) {
      case RawField::weight: fill(p.weight); break;
      case RawField::bias: fill(p.bias); break;
      case RawField::gamma: fill(p.gamma); break;
      case RawField::beta: fill(p.beta); break;
      case RawField::running_mean: fill(p.running_mean); break;
      case RawField::running_var: fill(p.running_var); break;
    }
    present[r.layer].insert(r.field);
  }
  for (std::size_t i = 0; i < layers; ++i) {
    const LayerSpec& spec = c.arch.layers[i];
    for (auto f : {RawField::weight, RawField::bias, RawField::gamma, RawField::beta,
                   RawField::running_mean, RawField::running_var}) {
      if (f == RawField::weight && m.compressed(i)) continue;
      if (raw_length(spec, f) > 0 && !present[i].count(f)) {
        throw FormatError("lnx: layer " + std::to_string(i) + " is missing stored parameters");
      }
    }
  }
  m.decode_weights();
  return m;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed for '" + path + "'");
}

}  // namespace lnx
