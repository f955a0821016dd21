#include "transientsynth/export.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "transientsynth/errors.hpp"

namespace tsynth {

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << header << '\n';
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_trace_csv(const ActivationTrace& trace, const std::filesystem::path& path) {
  auto out = open_csv(path, "layer,unit,sample_index,activation");
  char buf[96];
  for (int l = 0; l < trace.n_layers; ++l) {
    for (int u = 0; u < trace.hidden; ++u) {
      for (std::size_t t = 0; t < trace.n_samples(); ++t) {
        std::snprintf(buf, sizeof buf, "%d,%d,%zu,%.17g\n", l + 1, u + 1, t, trace.at(t, l, u));
        out << buf;
      }
    }
  }
  finish(out, path);
}

ActivationTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != "layer,unit,sample_index,activation") {
    throw IoError(path, "missing trace header");
  }
  struct Row {
    int layer, unit;
    std::size_t t;
    double v;
  };
  std::vector<Row> rows;
  int max_layer = 0, max_unit = 0;
  std::size_t max_t = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row r{};
    if (std::sscanf(line.c_str(), "%d,%d,%zu,%lf", &r.layer, &r.unit, &r.t, &r.v) != 4 || r.layer < 1 || r.unit < 1) {
      throw IoError(path, "malformed trace row: " + line);
    }
    max_layer = std::max(max_layer, r.layer);
    max_unit = std::max(max_unit, r.unit);
    max_t = std::max(max_t, r.t + 1);
    rows.push_back(r);
  }
  ActivationTrace trace;
  trace.n_layers = max_layer;
  trace.hidden = max_unit;
  trace.controls.pitch.assign(max_t, 0.0);
  trace.controls.volume.assign(max_t, 0.0);
  trace.controls.instrument.assign(max_t, 0.0);
  trace.values.assign(max_t * trace.width(), 0.0);
  for (const auto& r : rows) {
    trace.values[r.t * trace.width() + static_cast<std::size_t>(r.layer - 1) * trace.hidden + (r.unit - 1)] = r.v;
  }
  return trace;
}

void write_stats_csv(const std::vector<LabeledStats>& stats, const std::filesystem::path& path) {
  auto out = open_csv(path, "layer,unit,dc,amplitude,period");
  for (const auto& s : stats) {
    out << s.layer + 1 << ',' << s.unit + 1 << ',' << fmt_double(s.stats.dc_offset) << ','
        << fmt_double(s.stats.osc_amplitude) << ','
        << (s.stats.period_samples ? fmt_double(*s.stats.period_samples) : std::string()) << '\n';
  }
  finish(out, path);
}

void write_profiles_csv(const SelectivityReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path, "layer,unit,direction,bin,volume,amplitude,class");
  for (const auto* profiles : {&report.up, &report.down}) {
    for (const auto& p : *profiles) {
      for (std::size_t b = 0; b < p.amplitude.size(); ++b) {
        out << p.layer + 1 << ',' << p.unit + 1 << ',' << (p.rising ? "up" : "down") << ',' << b << ','
            << fmt_double(b < report.bin_centers.size() ? report.bin_centers[b] : 0.0) << ','
            << fmt_double(p.amplitude[b]) << ',' << to_string(p.cls) << '\n';
      }
    }
  }
  finish(out, path);
}

void write_pitch_lock_csv(const PitchLockReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path, "layer,unit,pitch,expected_period,period,amplitude,oscillating,locked");
  for (const auto& r : report.rows) {
    out << r.layer + 1 << ',' << r.unit + 1 << ',' << fmt_double(r.pitch) << ',' << fmt_double(r.expected_period)
        << ',' << (r.stats.period_samples ? fmt_double(*r.stats.period_samples) : std::string()) << ','
        << fmt_double(r.stats.osc_amplitude) << ',' << (r.oscillating ? 1 : 0) << ',' << (r.locked ? 1 : 0) << '\n';
  }
  finish(out, path);
}

void write_reactions_csv(const TransientMap& map, const std::filesystem::path& path) {
  auto out = open_csv(path, "layer,unit,edge_index,edge_sample,direction,reaction_samples");
  for (const auto& r : map.reactions) {
    for (std::size_t k = 0; k < r.reactions.size(); ++k) {
      out << r.layer + 1 << ',' << r.unit + 1 << ',' << k << ',' << map.edges[k] << ','
          << (map.edge_rising[k] ? "onset" : "offset") << ','
          << (r.reactions[k] ? std::to_string(*r.reactions[k]) : std::string()) << '\n';
    }
  }
  finish(out, path);
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[i] = r;
  pixels[i + 1] = g;
  pixels[i + 2] = b;
}

void diverging_color(double v, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
  const double c = std::clamp(std::isfinite(v) ? v : 0.0, -1.0, 1.0);
  const auto ch = [](double x) { return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(x, 0.0, 1.0))); };
  if (c >= 0.0) {
    r = 255;
    g = ch(1.0 - c);
    b = ch(1.0 - c);
  } else {
    r = ch(1.0 + c);
    g = ch(1.0 + c);
    b = 255;
  }
}

RgbImage activation_heatmap(const ActivationTrace& trace, int layer, int decimation) {
  if (layer < 0 || layer >= trace.n_layers) throw InvalidArgument("heatmap layer out of range");
  if (decimation < 1) throw InvalidArgument("heatmap decimation must be >= 1");
  RgbImage img;
  img.height = trace.hidden;
  img.width = static_cast<int>(trace.n_samples() / static_cast<std::size_t>(decimation));
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);
  const auto& volume = trace.controls.volume;
  for (int x = 0; x < img.width; ++x) {
    const std::size_t t0 = static_cast<std::size_t>(x) * decimation;
    for (int u = 0; u < trace.hidden; ++u) {
      double acc = 0.0;
      for (int k = 0; k < decimation; ++k) acc += trace.at(t0 + k, layer, u);
      std::uint8_t r, g, b;
      diverging_color(acc / decimation, r, g, b);
      img.set(x, u, r, g, b);
    }
    if (t0 < volume.size() && img.height > 0) {
      const double v = std::clamp(volume[t0], 0.0, 1.0);
      const int y = static_cast<int>(std::lround((1.0 - v) * (img.height - 1)));
      img.set(x, y, 0, 0, 0);
    }
  }
  return img;
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (image.width == 0 || image.height == 0) throw IoError(path, "cannot write an empty image");
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw IoError(path, std::string("PNG write failed: ") + png.message);
  }
}

}  // namespace tsynth
