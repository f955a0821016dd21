#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "transientsynth/errors.hpp"
#include "transientsynth/synthdata.hpp"
#include "transientsynth/wav.hpp"

namespace tsynth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "transientsynth-dataset";
constexpr int kManifestVersion = 1;

std::string file_label(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out.empty() ? "inst" : out;
}

std::string sequence_stem(const std::string& instrument, int pitch_index, int volume_index) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "seq_%s_%02d_%02d", file_label(instrument).c_str(), pitch_index, volume_index);
  return buf;
}

json instrument_to_json(const InstrumentSpec& spec) {
  json partials = json::array();
  for (const auto& p : spec.partials) partials.push_back({p.harmonic, p.amplitude});
  return {{"name", spec.name},
          {"control_value", spec.control_value},
          {"partials", partials},
          {"attack_slope", spec.attack_slope},
          {"decay_slope", spec.decay_slope}};
}

InstrumentSpec instrument_from_json(const json& j) {
  InstrumentSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.control_value = j.at("control_value").get<double>();
  for (const auto& p : j.at("partials")) spec.partials.push_back({p.at(0).get<int>(), p.at(1).get<double>()});
  spec.attack_slope = j.at("attack_slope").get<double>();
  spec.decay_slope = j.at("decay_slope").get<double>();
  return spec;
}

}  // namespace

void write_tracks_csv(const ConditioningTracks& tracks, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "sample_index,pitch,volume,instrument\n";
  char buf[128];
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, tracks.pitch[i], tracks.volume[i],
                  tracks.instrument[i]);
    out << buf;
  }
  if (!out) throw IoError(path, "write failed");
}

ConditioningTracks read_tracks_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample_index", 0) != 0) throw IoError(path, "missing tracks header");
  ConditioningTracks tracks;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t index = 0;
    double p = 0, v = 0, ins = 0;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf", &index, &p, &v, &ins) != 4 || index != expected) {
      throw IoError(path, "malformed tracks row " + std::to_string(expected));
    }
    tracks.pitch.push_back(p);
    tracks.volume.push_back(v);
    tracks.instrument.push_back(ins);
    ++expected;
  }
  return tracks;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& manifest_path) {
  json instruments = json::array();
  for (const auto& spec : manifest.instruments) instruments.push_back(instrument_to_json(spec));
  json sequences = json::array();
  for (const auto& e : manifest.sequences) {
    sequences.push_back({{"audio", e.audio_file},
                         {"tracks", e.tracks_file},
                         {"instrument", e.instrument},
                         {"instrument_value", e.instrument_value},
                         {"pitch_index", e.pitch_index},
                         {"pitch", e.pitch},
                         {"volume", e.volume},
                         {"length", e.length}});
  }
  const auto& c = manifest.config;
  json j = {{"format", kManifestFormat},
            {"version", kManifestVersion},
            {"sample_rate", manifest.sample_rate},
            {"grid",
             {{"instruments", manifest.n_instruments},
              {"pitches", manifest.n_pitches},
              {"volumes", manifest.n_volumes},
              {"max_volume", c.max_volume},
              {"base_fraction", c.base_fraction}}},
            {"timing", {{"lead", c.timing.lead}, {"steady", c.timing.steady}, {"tail", c.timing.tail}}},
            {"instruments", instruments},
            {"sequences", sequences}};
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoError(manifest_path, "cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError(manifest_path, "write failed");
}

DatasetManifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError(manifest_path, "cannot open for reading");
  DatasetManifest m;
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != kManifestFormat) throw DatasetError("not a dataset manifest");
    if (j.at("version").get<int>() != kManifestVersion) throw DatasetError("unsupported manifest version");
    m.root = manifest_path.parent_path();
    m.sample_rate = j.at("sample_rate").get<int>();
    const auto& g = j.at("grid");
    m.n_instruments = g.at("instruments").get<int>();
    m.n_pitches = g.at("pitches").get<int>();
    m.n_volumes = g.at("volumes").get<int>();
    m.config.n_pitches = m.n_pitches;
    m.config.n_volumes = m.n_volumes;
    m.config.max_volume = g.at("max_volume").get<double>();
    m.config.base_fraction = g.value("base_fraction", 0.0);
    m.config.sample_rate = m.sample_rate;
    const auto& t = j.at("timing");
    m.config.timing = {t.at("lead").get<double>(), t.at("steady").get<double>(), t.at("tail").get<double>()};
    for (const auto& ij : j.at("instruments")) m.instruments.push_back(instrument_from_json(ij));
    for (const auto& s : j.at("sequences")) {
      SequenceEntry e;
      e.audio_file = s.at("audio").get<std::string>();
      e.tracks_file = s.at("tracks").get<std::string>();
      e.instrument = s.at("instrument").get<std::string>();
      e.instrument_value = s.at("instrument_value").get<double>();
      e.pitch_index = s.at("pitch_index").get<int>();
      e.pitch = s.at("pitch").get<double>();
      e.volume = s.at("volume").get<double>();
      e.length = s.at("length").get<std::size_t>();
      m.sequences.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DatasetError(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  return m;
}

void validate_grid(const DatasetManifest& m) {
  const auto expected = static_cast<std::size_t>(m.n_instruments) * m.n_pitches * m.n_volumes;
  if (m.sequences.size() != expected) {
    throw DatasetError("manifest lists " + std::to_string(m.sequences.size()) + " sequences, grid " +
                       std::to_string(m.n_instruments) + "x" + std::to_string(m.n_pitches) + "x" +
                       std::to_string(m.n_volumes) + " needs " + std::to_string(expected));
  }
  if (static_cast<int>(m.instruments.size()) != m.n_instruments) {
    throw DatasetError("manifest instrument list does not match grid");
  }
  std::map<std::tuple<std::string, int>, int> cells;
  for (const auto& e : m.sequences) ++cells[{e.instrument, e.pitch_index}];
  if (static_cast<int>(cells.size()) != m.n_instruments * m.n_pitches) {
    throw DatasetError("manifest does not cover every instrument/pitch cell");
  }
  for (const auto& [key, count] : cells) {
    if (count != m.n_volumes) {
      throw DatasetError("instrument " + std::get<0>(key) + " pitch " + std::to_string(std::get<1>(key)) +
                         " has " + std::to_string(count) + " volume levels");
    }
  }
}

DatasetManifest build_dataset(const std::vector<InstrumentSpec>& specs, const DatasetConfig& config,
                              const fs::path& out_dir) {
  if (specs.empty()) throw InvalidArgument("no instruments to render");
  for (const auto& s : specs) validate(s);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(out_dir, "cannot create directory: " + ec.message());

  DatasetManifest m;
  m.root = out_dir;
  m.sample_rate = config.sample_rate;
  m.n_instruments = static_cast<int>(specs.size());
  m.n_pitches = config.n_pitches;
  m.n_volumes = config.n_volumes;
  m.config = config;
  m.instruments = specs;

  const auto pitches = grid_pitch_indices(config.n_pitches);
  const auto volumes = grid_volumes(config.n_volumes, config.max_volume);
  for (const auto& spec : specs) {
    for (int pitch_index : pitches) {
      for (std::size_t vi = 0; vi < volumes.size(); ++vi) {
        const auto seq =
            render_sequence(spec, pitch_index, volumes[vi], config.timing, config.base_fraction, config.sample_rate);
        const std::string stem = sequence_stem(spec.name, pitch_index, static_cast<int>(vi) + 1);
        SequenceEntry e;
        e.audio_file = stem + ".wav";
        e.tracks_file = stem + ".tracks.csv";
        e.instrument = spec.name;
        e.instrument_value = spec.control_value;
        e.pitch_index = pitch_index;
        e.pitch = seq.pitch;
        e.volume = volumes[vi];
        e.length = seq.audio.size();
        write_wav(out_dir / e.audio_file, std::span<const double>(seq.audio), config.sample_rate);
        write_tracks_csv(seq.tracks, out_dir / e.tracks_file);
        m.sequences.push_back(std::move(e));
      }
    }
  }
  write_manifest(m, out_dir / "manifest.json");
  return m;
}

TrainingSequence load_sequence(const DatasetManifest& manifest, const SequenceEntry& entry) {
  const auto audio_path = manifest.root / entry.audio_file;
  const auto wav = read_wav(audio_path);
  if (wav.sample_rate != manifest.sample_rate) throw DatasetError(audio_path.string() + ": sample rate mismatch");
  const auto tracks = read_tracks_csv(manifest.root / entry.tracks_file);
  if (wav.samples.size() != entry.length || tracks.size() != entry.length) {
    throw DatasetError(audio_path.string() + ": length does not match manifest");
  }
  std::vector<double> audio(wav.samples.size());
  std::transform(wav.samples.begin(), wav.samples.end(), audio.begin(), from_pcm16);
  auto seq = frames_from_audio(audio, tracks);
  seq.instrument = entry.instrument;
  seq.pitch_index = entry.pitch_index;
  seq.volume = entry.volume;
  return seq;
}

std::vector<TrainingSequence> load_sequences(const DatasetManifest& manifest) {
  validate_grid(manifest);
  std::vector<TrainingSequence> out;
  out.reserve(manifest.sequences.size());
  for (const auto& e : manifest.sequences) out.push_back(load_sequence(manifest, e));
  return out;
}

}  // namespace tsynth
