#include "transientsynth/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tsynth {

namespace {

using Kind = CheckpointError::Kind;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> in, std::size_t pos) : in_(in), pos_(pos) {}
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t checkpoint_size(const NetworkConfig& config) {
  return kCheckpointHeaderBytes + kCheckpointConfigBytes + 4 * parameter_count(config) + 8;
}

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams& params, const CheckpointMeta& meta) {
  validate(params);
  const auto& c = params.config;
  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(kCheckpointConfigBytes));
  for (int v : {c.n_layers, c.hidden, c.in_dim, c.out_dim, meta.sample_rate, meta.n_codes}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  for (double v : {meta.mu, meta.base_frequency_hz, meta.pitch_span_octaves, meta.volume_range_db,
                   meta.instrument_even, meta.instrument_odd}) {
    w.f64(v);
  }
  for (auto t : tensors(params)) {
    for (double v : t) w.f32(static_cast<float>(v));
  }
  w.u64(fnv1a64(w.data()));
  return std::move(w.data());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCheckpointHeaderBytes) throw CheckpointError(Kind::truncated, "checkpoint truncated in header");
  if (std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw CheckpointError(Kind::bad_magic, "not a checkpoint file (bad magic)");
  }
  Reader header(bytes, 8);
  const std::uint32_t version = header.u32();
  const std::uint32_t config_bytes = header.u32();
  if (version != kCheckpointVersion || config_bytes != kCheckpointConfigBytes) {
    throw CheckpointError(Kind::unsupported_version, "unsupported checkpoint version " + std::to_string(version));
  }
  if (bytes.size() < kCheckpointHeaderBytes + kCheckpointConfigBytes + 8) {
    throw CheckpointError(Kind::truncated, "checkpoint truncated in config block");
  }

  Reader r(bytes, kCheckpointHeaderBytes);
  Checkpoint ck;
  NetworkConfig c;
  c.n_layers = static_cast<int>(r.u32());
  c.hidden = static_cast<int>(r.u32());
  c.in_dim = static_cast<int>(r.u32());
  c.out_dim = static_cast<int>(r.u32());
  ck.meta.sample_rate = static_cast<int>(r.u32());
  ck.meta.n_codes = static_cast<int>(r.u32());
  ck.meta.mu = r.f64();
  ck.meta.base_frequency_hz = r.f64();
  ck.meta.pitch_span_octaves = r.f64();
  ck.meta.volume_range_db = r.f64();
  ck.meta.instrument_even = r.f64();
  ck.meta.instrument_odd = r.f64();
  ck.meta.version = version;

  const auto stored_sum = [&] {
    Reader tail(bytes, bytes.size() - 8);
    return tail.u64();
  };
  const bool checksum_ok = fnv1a64(bytes.first(bytes.size() - 8)) == stored_sum();

  constexpr int kMaxDim = 1 << 16;
  const bool dims_sane = c.n_layers > 0 && c.hidden > 0 && c.in_dim > 0 && c.out_dim > 0 && c.n_layers < kMaxDim &&
                         c.hidden < kMaxDim && c.in_dim < kMaxDim && c.out_dim < kMaxDim;
  if (!dims_sane || bytes.size() != checkpoint_size(c)) {
    if (checksum_ok) throw CheckpointError(Kind::dimension_mismatch, "declared dimensions do not match weight bytes");
    if (dims_sane && bytes.size() < checkpoint_size(c)) throw CheckpointError(Kind::truncated, "checkpoint truncated");
    throw CheckpointError(Kind::checksum_mismatch, "checkpoint checksum mismatch");
  }
  if (!checksum_ok) throw CheckpointError(Kind::checksum_mismatch, "checkpoint checksum mismatch");

  ck.params = NetworkParams::zeros(c);
  Reader weights(bytes, kCheckpointHeaderBytes + kCheckpointConfigBytes);
  for (auto t : tensors(ck.params)) {
    for (double& v : t) v = static_cast<double>(weights.f32());
  }
  return ck;
}

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::io, path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::io, path.string() + ": write failed");
}

Checkpoint load_checkpoint_with_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, path.string() + ": cannot open for reading");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

NetworkParams load_checkpoint(const std::filesystem::path& path) { return load_checkpoint_with_meta(path).params; }

NetworkParams quantize_to_stored_precision(const NetworkParams& params) {
  NetworkParams out = params;
  for (auto t : tensors(out)) {
    for (double& v : t) v = static_cast<double>(static_cast<float>(v));
  }
  return out;
}

}  // namespace tsynth
