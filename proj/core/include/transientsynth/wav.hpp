#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace tsynth {

// Mono 16-bit PCM RIFF/WAVE.
struct WavData {
  int sample_rate = 16000;
  std::vector<std::int16_t> samples;
};

std::int16_t to_pcm16(double x);
double from_pcm16(std::int16_t s);

std::vector<std::int16_t> to_pcm16(std::span<const double> audio);

void write_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples, int sample_rate);
void write_wav(const std::filesystem::path& path, std::span<const double> audio, int sample_rate);

// Accepts only mono 16-bit PCM; throws IoError otherwise.
WavData read_wav(const std::filesystem::path& path);

}  // namespace tsynth
