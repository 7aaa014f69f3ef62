#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "atcline/align.hpp"
#include "atcline/features.hpp"
#include "atcline/raster.hpp"

// Materializes aligned command-maneuver pairs into model-ready samples and a
// grouped train/validation split. Files store raw values; standardization
// statistics (train split only) travel in schema.json and are applied by the
// model code at the tensor boundary.
namespace atcline {

inline constexpr int kSequenceChannels = 4;  // alt, gs, hdg_sin, hdg_cos

const std::vector<std::string>& sequence_channel_names();

struct DatasetConfig {
  double train_frac = 0.8;
  std::uint64_t seed = 0;
  int sequence_len = 60;  // 1 Hz samples ending at event onset
  AlignmentConfig align;  // recorded for provenance
  RasterConfig raster;

  void validate() const;
};

struct LifecycleSample {
  std::string callsign;
  std::string group;  // callsign-day key; splits never divide a group
  ParsedCommand cmd;
  ManeuverEvent event;
  StructuredFeatures features;   // raw slot values
  std::vector<double> sequence;  // sequence_len x 4, row-major, raw units
  SceneImage history_image;
  SceneImage snapshot_image;
  double time_offset_s = 0.0;
  double duration_s = 0.0;
};

// Per-dimension first/second moments; stdev of a constant dimension is
// stored as 1 so standardization is the identity shift there.
struct Moments {
  std::vector<double> mean;
  std::vector<double> stdev;
};

struct DatasetStats {
  Moments features;  // per structured slot
  Moments sequence;  // per sequence channel
  Moments targets;   // [time_offset_s, duration_s]
};

struct Dataset {
  DatasetConfig cfg;
  std::vector<LifecycleSample> samples;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  DatasetStats stats;  // train split only
  std::uint64_t schema_hash = 0;
  std::size_t dropped = 0;  // pairs lost to sequence-window underrun
};

// FNV-1a over the feature slot names and sequence channel names; guards
// checkpoints against schema drift.
std::uint64_t feature_schema_hash();

// Builds one sample per aligned pair. All trajectory-derived inputs anchor at
// event.onset_t: the 60 s sequence ends there, the history image covers the
// raster window before it, and the snapshot captures the airspace at it.
// Pairs whose trajectory cannot cover the sequence window are dropped and
// counted. Split is seeded and grouped; stats come from the train split.
Dataset build_dataset(const std::vector<AlignedPair>& pairs,
                      const std::vector<Trajectory>& trajs,
                      const FeatureContext& ctx, const DatasetConfig& cfg,
                      int threads = 1);

// Directory layout: index.jsonl, sequences.bin (float64 LE, N x len x 4),
// images/NNNNN_{hist,snap}.bin (+ .json sidecars), schema.json.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

double standardize(double v, double mean, double stdev);
double destandardize(double z, double mean, double stdev);

std::vector<double> standardized_features(const DatasetStats& stats,
                                          const LifecycleSample& s);
std::vector<double> standardized_sequence(const DatasetStats& stats,
                                          const LifecycleSample& s);
// Targets as [offset_z, duration_z].
std::vector<double> standardized_targets(const DatasetStats& stats,
                                         const LifecycleSample& s);

}  // namespace atcline
