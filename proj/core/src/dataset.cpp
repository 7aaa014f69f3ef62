#include "atcline/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include <json.hpp>

#include "atcline/io.hpp"
#include "atcline/par.hpp"
#include "atcline/rng.hpp"
#include "atcline/util.hpp"

namespace atcline {

namespace {

constexpr double kMinStd = 1e-12;

std::string image_stem(std::size_t i, const char* kind) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu_%s.bin", i, kind);
  return buf;
}

// Population moments over an iterator-free accumulation: callers feed every
// observation of one dimension through the same index.
struct MomentAcc {
  std::vector<double> sum, sumsq;
  double n = 0.0;

  explicit MomentAcc(std::size_t dims) : sum(dims, 0.0), sumsq(dims, 0.0) {}

  void add(std::size_t d, double v) {
    sum[d] += v;
    sumsq[d] += v * v;
  }

  Moments finish(double count) const {
    Moments m;
    m.mean.resize(sum.size());
    m.stdev.resize(sum.size());
    for (std::size_t d = 0; d < sum.size(); ++d) {
      const double mean = count > 0.0 ? sum[d] / count : 0.0;
      const double var = count > 0.0 ? std::max(0.0, sumsq[d] / count - mean * mean)
                                     : 0.0;
      m.mean[d] = mean;
      const double sd = std::sqrt(var);
      m.stdev[d] = sd < kMinStd ? 1.0 : sd;
    }
    return m;
  }
};

nlohmann::ordered_json moments_json(const Moments& m) {
  nlohmann::ordered_json j;
  j["mean"] = m.mean;
  j["stdev"] = m.stdev;
  return j;
}

Moments moments_from_json(const nlohmann::json& j) {
  Moments m;
  m.mean = j.at("mean").get<std::vector<double>>();
  m.stdev = j.at("stdev").get<std::vector<double>>();
  if (m.mean.size() != m.stdev.size())
    throw SchemaMismatch("moment vectors disagree in length");
  return m;
}

}  // namespace

const std::vector<std::string>& sequence_channel_names() {
  static const std::vector<std::string> names = {"alt", "gs", "hdg_sin", "hdg_cos"};
  return names;
}

void DatasetConfig::validate() const {
  if (!(train_frac > 0.0 && train_frac <= 1.0))
    throw BadConfig("train_frac must be in (0, 1]");
  if (sequence_len < 2) throw BadConfig("sequence_len must be at least 2");
  align.validate();
  raster.validate();
}

std::uint64_t feature_schema_hash() {
  std::string joined;
  for (const auto& n : StructuredFeatures::names()) {
    joined += n;
    joined += '\n';
  }
  joined += '|';
  for (const auto& n : sequence_channel_names()) {
    joined += n;
    joined += '\n';
  }
  return fnv1a64(joined);
}

Dataset build_dataset(const std::vector<AlignedPair>& pairs,
                      const std::vector<Trajectory>& trajs,
                      const FeatureContext& ctx, const DatasetConfig& cfg,
                      int threads) {
  cfg.validate();

  std::map<std::string, const Trajectory*> by_callsign;
  for (const auto& t : trajs) by_callsign[t.callsign] = &t;

  // Fixed processing order regardless of caller ordering.
  std::vector<const AlignedPair*> ordered;
  ordered.reserve(pairs.size());
  for (const auto& p : pairs) ordered.push_back(&p);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const AlignedPair* a, const AlignedPair* b) {
                     if (a->cmd.start_t != b->cmd.start_t)
                       return a->cmd.start_t < b->cmd.start_t;
                     if (a->cmd.callsign != b->cmd.callsign)
                       return a->cmd.callsign < b->cmd.callsign;
                     return a->event.onset_t < b->event.onset_t;
                   });

  std::vector<std::optional<LifecycleSample>> slots(ordered.size());
  parallel_for(ordered.size(), threads, [&](std::size_t i) {
    const AlignedPair& p = *ordered[i];
    const auto it = by_callsign.find(p.cmd.callsign);
    if (it == by_callsign.end()) return;  // no trajectory: drop
    const Trajectory& traj = *it->second;
    const double onset = p.event.onset_t;
    const double seq_start = onset - (cfg.sequence_len - 1);
    if (!traj.covers(seq_start) || !traj.covers(onset)) return;
    try {
      LifecycleSample s;
      s.callsign = p.cmd.callsign;
      s.group = p.cmd.callsign + "-d" +
                std::to_string(static_cast<long long>(std::floor(onset / 86400.0)));
      s.cmd = p.cmd;
      s.event = p.event;
      s.time_offset_s = p.time_offset_s;
      s.duration_s = p.cmd.duration_s;
      const auto states = states_at(trajs, onset);
      s.features = assemble_features(p.cmd, traj, onset, states, ctx);
      s.sequence.reserve(static_cast<std::size_t>(cfg.sequence_len) *
                         kSequenceChannels);
      for (int k = 0; k < cfg.sequence_len; ++k) {
        const auto st = state_at(traj, seq_start + k);
        s.sequence.push_back(st.alt);
        s.sequence.push_back(st.gs);
        s.sequence.push_back(std::sin(deg2rad(st.hdg)));
        s.sequence.push_back(std::cos(deg2rad(st.hdg)));
      }
      s.history_image = render_history(traj, onset, cfg.raster);
      s.snapshot_image = render_snapshot(states, p.cmd.callsign, onset, cfg.raster);
      slots[i] = std::move(s);
    } catch (const OutOfRange&) {
    } catch (const EmptyWindow&) {
    }
  });

  Dataset ds;
  ds.cfg = cfg;
  ds.schema_hash = feature_schema_hash();
  for (auto& slot : slots) {
    if (slot) ds.samples.push_back(std::move(*slot));
    else ++ds.dropped;
  }

  // Grouped split: shuffle group keys, fill train greedily to the target.
  std::vector<std::string> groups;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& g = ds.samples[i].group;
    if (!members.count(g)) groups.push_back(g);
    members[g].push_back(i);
  }
  Rng rng = Rng(cfg.seed).fork("split");
  rng.shuffle(groups);
  const auto target = static_cast<std::size_t>(
      std::llround(cfg.train_frac * static_cast<double>(ds.samples.size())));
  std::set<std::string> train_groups;
  std::size_t filled = 0;
  for (const auto& g : groups) {
    if (filled < target) {
      train_groups.insert(g);
      filled += members[g].size();
    }
  }
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (train_groups.count(ds.samples[i].group)) ds.train_idx.push_back(i);
    else ds.val_idx.push_back(i);
  }

  MomentAcc feat_acc(StructuredFeatures::count());
  MomentAcc seq_acc(kSequenceChannels);
  MomentAcc tgt_acc(2);
  double seq_rows = 0.0;
  for (const std::size_t i : ds.train_idx) {
    const auto& s = ds.samples[i];
    for (std::size_t d = 0; d < s.features.values.size(); ++d)
      feat_acc.add(d, s.features.values[d]);
    for (int k = 0; k < cfg.sequence_len; ++k)
      for (int c = 0; c < kSequenceChannels; ++c)
        seq_acc.add(c, s.sequence[static_cast<std::size_t>(k) * kSequenceChannels + c]);
    seq_rows += cfg.sequence_len;
    tgt_acc.add(0, s.time_offset_s);
    tgt_acc.add(1, s.duration_s);
  }
  const double n_train = static_cast<double>(ds.train_idx.size());
  ds.stats.features = feat_acc.finish(n_train);
  ds.stats.sequence = seq_acc.finish(seq_rows);
  ds.stats.targets = tgt_acc.finish(n_train);
  return ds;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir / "images");

  std::string index;
  std::vector<std::uint8_t> seq;
  seq.reserve(ds.samples.size() * ds.cfg.sequence_len * kSequenceChannels * 8);
  std::vector<bool> in_train(ds.samples.size(), false);
  for (const std::size_t i : ds.train_idx) in_train[i] = true;

  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const std::string hist_rel = "images/" + image_stem(i, "hist");
    const std::string snap_rel = "images/" + image_stem(i, "snap");
    nlohmann::ordered_json j;
    j["i"] = i;
    j["callsign"] = s.callsign;
    j["group"] = s.group;
    j["split"] = in_train[i] ? "train" : "val";
    nlohmann::ordered_json cj;
    cj["ctype"] = channel_name(s.cmd.ctype);
    cj["value"] = s.cmd.value;
    cj["direction"] = direction_name(s.cmd.direction);
    cj["start_t"] = s.cmd.start_t;
    cj["duration_s"] = s.cmd.duration_s;
    cj["conditional"] = s.cmd.conditional;
    cj["compound"] = s.cmd.compound;
    j["cmd"] = cj;
    nlohmann::ordered_json ej;
    ej["channel"] = channel_name(s.event.channel);
    ej["onset_t"] = s.event.onset_t;
    ej["from_value"] = s.event.from_value;
    ej["to_value"] = s.event.to_value;
    j["event"] = ej;
    j["time_offset_s"] = s.time_offset_s;
    j["duration_s"] = s.duration_s;
    j["features"] = s.features.values;
    j["history_image"] = hist_rel;
    j["snapshot_image"] = snap_rel;
    index += j.dump();
    index += '\n';

    for (const double v : s.sequence) append_f64(seq, v);
    save_image_bin(dir / hist_rel, s.history_image);
    save_image_bin(dir / snap_rel, s.snapshot_image);
  }
  write_text_file(dir / "index.jsonl", index);
  write_binary_file(dir / "sequences.bin", seq.data(), seq.size());

  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(ds.schema_hash));
  nlohmann::ordered_json schema;
  schema["schema_version"] = 1;
  schema["feature_names"] = StructuredFeatures::names();
  schema["sequence_channels"] = sequence_channel_names();
  schema["schema_hash"] = hash_hex;
  schema["sequence_len"] = ds.cfg.sequence_len;
  nlohmann::ordered_json counts;
  counts["samples"] = ds.samples.size();
  counts["train"] = ds.train_idx.size();
  counts["val"] = ds.val_idx.size();
  counts["dropped"] = ds.dropped;
  schema["counts"] = counts;
  nlohmann::ordered_json stats;
  stats["features"] = moments_json(ds.stats.features);
  stats["sequence"] = moments_json(ds.stats.sequence);
  stats["targets"] = moments_json(ds.stats.targets);
  schema["stats"] = stats;
  nlohmann::ordered_json cfgj;
  cfgj["train_frac"] = ds.cfg.train_frac;
  cfgj["seed"] = ds.cfg.seed;
  cfgj["align"] = {{"window_before_s", ds.cfg.align.window_before_s},
                   {"window_after_s", ds.cfg.align.window_after_s},
                   {"require_type_match", ds.cfg.align.require_type_match}};
  cfgj["raster"] = {{"width", ds.cfg.raster.width},
                    {"height", ds.cfg.raster.height},
                    {"history_window_s", ds.cfg.raster.history_window_s},
                    {"vector_horizon_s", ds.cfg.raster.vector_horizon_s},
                    {"area_lat_min", ds.cfg.raster.area_lat_min},
                    {"area_lat_max", ds.cfg.raster.area_lat_max},
                    {"area_lon_min", ds.cfg.raster.area_lon_min},
                    {"area_lon_max", ds.cfg.raster.area_lon_max},
                    {"margin_frac", ds.cfg.raster.margin_frac}};
  schema["config"] = cfgj;
  write_text_file(dir / "schema.json", schema.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto schema = nlohmann::json::parse(read_text_file(dir / "schema.json"));
  Dataset ds;
  ds.cfg.sequence_len = schema.at("sequence_len").get<int>();
  ds.cfg.train_frac = schema.at("config").at("train_frac").get<double>();
  ds.cfg.seed = schema.at("config").at("seed").get<std::uint64_t>();
  const auto& aj = schema.at("config").at("align");
  ds.cfg.align.window_before_s = aj.at("window_before_s").get<double>();
  ds.cfg.align.window_after_s = aj.at("window_after_s").get<double>();
  ds.cfg.align.require_type_match = aj.at("require_type_match").get<bool>();
  const auto& rj = schema.at("config").at("raster");
  ds.cfg.raster.width = rj.at("width").get<int>();
  ds.cfg.raster.height = rj.at("height").get<int>();
  ds.cfg.raster.history_window_s = rj.at("history_window_s").get<double>();
  ds.cfg.raster.vector_horizon_s = rj.at("vector_horizon_s").get<double>();
  ds.cfg.raster.area_lat_min = rj.at("area_lat_min").get<double>();
  ds.cfg.raster.area_lat_max = rj.at("area_lat_max").get<double>();
  ds.cfg.raster.area_lon_min = rj.at("area_lon_min").get<double>();
  ds.cfg.raster.area_lon_max = rj.at("area_lon_max").get<double>();
  ds.cfg.raster.margin_frac = rj.at("margin_frac").get<double>();
  ds.dropped = schema.at("counts").at("dropped").get<std::size_t>();
  ds.stats.features = moments_from_json(schema.at("stats").at("features"));
  ds.stats.sequence = moments_from_json(schema.at("stats").at("sequence"));
  ds.stats.targets = moments_from_json(schema.at("stats").at("targets"));

  const auto names = schema.at("feature_names").get<std::vector<std::string>>();
  if (names != StructuredFeatures::names())
    throw SchemaMismatch("dataset feature names disagree with this build");
  ds.schema_hash = feature_schema_hash();
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(ds.schema_hash));
  if (schema.at("schema_hash").get<std::string>() != hash_hex)
    throw SchemaMismatch("dataset schema hash disagrees with this build");

  const auto seq_bytes = read_binary_file(dir / "sequences.bin");
  BinaryReader seq(seq_bytes);
  for (const auto& line : read_lines(dir / "index.jsonl")) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    LifecycleSample s;
    s.callsign = j.at("callsign").get<std::string>();
    s.group = j.at("group").get<std::string>();
    const auto& cj = j.at("cmd");
    s.cmd.callsign = s.callsign;
    s.cmd.ctype = channel_from_name(cj.at("ctype").get<std::string>());
    s.cmd.value = cj.at("value").get<long long>();
    s.cmd.direction = direction_from_name(cj.at("direction").get<std::string>());
    s.cmd.start_t = cj.at("start_t").get<double>();
    s.cmd.duration_s = cj.at("duration_s").get<double>();
    s.cmd.conditional = cj.at("conditional").get<bool>();
    s.cmd.compound = cj.at("compound").get<bool>();
    const auto& ej = j.at("event");
    s.event.callsign = s.callsign;
    s.event.channel = channel_from_name(ej.at("channel").get<std::string>());
    s.event.onset_t = ej.at("onset_t").get<double>();
    s.event.from_value = ej.at("from_value").get<double>();
    s.event.to_value = ej.at("to_value").get<double>();
    s.time_offset_s = j.at("time_offset_s").get<double>();
    s.duration_s = j.at("duration_s").get<double>();
    s.features.values = j.at("features").get<std::vector<double>>();
    if (s.features.values.size() != StructuredFeatures::count())
      throw SchemaMismatch("feature vector width drifted in " + s.callsign);
    const std::size_t seq_n =
        static_cast<std::size_t>(ds.cfg.sequence_len) * kSequenceChannels;
    s.sequence.resize(seq_n);
    for (auto& v : s.sequence) v = seq.f64();
    s.history_image = load_image_bin(dir / j.at("history_image").get<std::string>());
    s.snapshot_image = load_image_bin(dir / j.at("snapshot_image").get<std::string>());
    if (j.at("split").get<std::string>() == "train")
      ds.train_idx.push_back(ds.samples.size());
    else
      ds.val_idx.push_back(ds.samples.size());
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

double standardize(double v, double mean, double stdev) { return (v - mean) / stdev; }

double destandardize(double z, double mean, double stdev) { return z * stdev + mean; }

std::vector<double> standardized_features(const DatasetStats& stats,
                                          const LifecycleSample& s) {
  if (s.features.values.size() != stats.features.mean.size())
    throw SchemaMismatch("feature width disagrees with stats");
  std::vector<double> out(s.features.values.size());
  for (std::size_t d = 0; d < out.size(); ++d)
    out[d] = standardize(s.features.values[d], stats.features.mean[d],
                         stats.features.stdev[d]);
  return out;
}

std::vector<double> standardized_sequence(const DatasetStats& stats,
                                          const LifecycleSample& s) {
  if (stats.sequence.mean.size() != kSequenceChannels)
    throw SchemaMismatch("sequence stats width drifted");
  std::vector<double> out(s.sequence.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t c = i % kSequenceChannels;
    out[i] = standardize(s.sequence[i], stats.sequence.mean[c],
                         stats.sequence.stdev[c]);
  }
  return out;
}

std::vector<double> standardized_targets(const DatasetStats& stats,
                                         const LifecycleSample& s) {
  return {standardize(s.time_offset_s, stats.targets.mean[0], stats.targets.stdev[0]),
          standardize(s.duration_s, stats.targets.mean[1], stats.targets.stdev[1])};
}

}  // namespace atcline
