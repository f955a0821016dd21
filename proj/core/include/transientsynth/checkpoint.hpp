#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "transientsynth/errors.hpp"
#include "transientsynth/network.hpp"

namespace tsynth {

// Binary layout, all little-endian:
//
//   offset 0   char[8]  magic "TSYNCKPT"
//          8   u32      format version (1)
//         12   u32      config block size in bytes (72 for version 1)
//         16   config block:
//                u32 n_layers, hidden, in_dim, out_dim, sample_rate, n_codes
//                f64 mu, base_frequency_hz, pitch_span_octaves, volume_range_db,
//                    instrument_even, instrument_odd
//         88   f32 weights, parameter_count(config) of them, in the order of
//              tensors(): input.weight, input.bias, per layer
//              w_z w_r w_h u_z u_r u_h b_z b_r b_h, output.weight, output.bias.
//              Matrices are row-major.
//        end-8 u64 FNV-1a 64 of every preceding byte
inline constexpr char kCheckpointMagic[8] = {'T', 'S', 'Y', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 16;
inline constexpr std::size_t kCheckpointConfigBytes = 72;

class CheckpointError : public Error {
 public:
  enum class Kind { io, bad_magic, unsupported_version, checksum_mismatch, truncated, dimension_mismatch };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct CheckpointMeta {
  std::uint32_t version = kCheckpointVersion;
  int sample_rate = kSampleRate;
  int n_codes = kNumCodes;
  double mu = kMuLaw;
  double base_frequency_hz = kBaseFrequencyHz;
  double pitch_span_octaves = kPitchSpanOctaves;
  double volume_range_db = kVolumeRangeDb;
  double instrument_even = kInstrumentEven;
  double instrument_odd = kInstrumentOdd;
};

struct Checkpoint {
  NetworkParams params;
  CheckpointMeta meta;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::size_t checkpoint_size(const NetworkConfig& config);

std::vector<std::uint8_t> encode_checkpoint(const NetworkParams& params, const CheckpointMeta& meta = {});
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);
Checkpoint load_checkpoint_with_meta(const std::filesystem::path& path);

// Rounds every weight through float32, i.e. the values a save/load round trip yields.
NetworkParams quantize_to_stored_precision(const NetworkParams& params);

}  // namespace tsynth
