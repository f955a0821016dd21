#include "transientsynth/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "transientsynth/errors.hpp"

namespace tsynth {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b.data(), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

std::int16_t to_pcm16(double x) {
  if (std::isnan(x)) return 0;
  const double scaled = std::round(std::clamp(x, -1.0, 1.0) * 32767.0);
  return static_cast<std::int16_t>(scaled);
}

double from_pcm16(std::int16_t s) { return static_cast<double>(s) / 32767.0; }

std::vector<std::int16_t> to_pcm16(std::span<const double> audio) {
  std::vector<std::int16_t> out(audio.size());
  std::transform(audio.begin(), audio.end(), out.begin(), [](double x) { return to_pcm16(x); });
  return out;
}

void write_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples, int sample_rate) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (std::int16_t s : samples) put_u16(out, static_cast<std::uint16_t>(s));
  if (!out) throw IoError(path, "write failed");
}

void write_wav(const std::filesystem::path& path, std::span<const double> audio, int sample_rate) {
  const auto pcm = to_pcm16(audio);
  write_wav(path, std::span<const std::int16_t>(pcm), sample_rate);
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw IoError(path, "not a RIFF/WAVE file");
  }

  WavData wav;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw IoError(path, "truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw IoError(path, "short fmt chunk");
      const auto format = get_u16(bytes.data() + body);
      const auto channels = get_u16(bytes.data() + body + 2);
      const auto bits = get_u16(bytes.data() + body + 14);
      if (format != 1 || channels != 1 || bits != 16) throw IoError(path, "only mono 16-bit PCM is supported");
      wav.sample_rate = static_cast<int>(get_u32(bytes.data() + body + 4));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw IoError(path, "data chunk before fmt chunk");
      wav.samples.resize(size / 2);
      for (std::size_t i = 0; i < wav.samples.size(); ++i) {
        wav.samples[i] = static_cast<std::int16_t>(get_u16(bytes.data() + body + 2 * i));
      }
      return wav;
    }
    pos = body + size + (size & 1u);
  }
  throw IoError(path, "no data chunk");
}

}  // namespace tsynth
