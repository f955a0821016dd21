#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "transientsynth/probe.hpp"
#include "transientsynth/trace.hpp"

namespace tsynth {

// `layer,unit,sample_index,activation`, 1-based layer/unit labels, values
// printed with 17 significant digits.
void write_trace_csv(const ActivationTrace& trace, const std::filesystem::path& path);

// Reads the trace CSV back. Conditioning tracks are not part of the file and
// come back empty except for their length.
ActivationTrace read_trace_csv(const std::filesystem::path& path);

struct LabeledStats {
  int layer = 0;  // 0-based
  int unit = 0;
  UnitStats stats;
};

// `layer,unit,dc,amplitude,period` (period empty when none).
void write_stats_csv(const std::vector<LabeledStats>& stats, const std::filesystem::path& path);

// `layer,unit,direction,bin,volume,amplitude,class`
void write_profiles_csv(const SelectivityReport& report, const std::filesystem::path& path);

// `layer,unit,pitch,expected_period,period,amplitude,oscillating,locked`
void write_pitch_lock_csv(const PitchLockReport& report, const std::filesystem::path& path);

// `layer,unit,edge_index,edge_sample,direction,reaction_samples`
void write_reactions_csv(const TransientMap& map, const std::filesystem::path& path);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

// Blue-white-red map for [-1, 1].
void diverging_color(double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b);

// Units of one layer (rows) against time (columns, one per `decimation`
// samples, averaged); the volume track is drawn over it in black.
RgbImage activation_heatmap(const ActivationTrace& trace, int layer, int decimation);

void write_png(const RgbImage& image, const std::filesystem::path& path);

}  // namespace tsynth
