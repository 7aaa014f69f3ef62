#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include <doctest.h>

#include "atcline/dataset.hpp"
#include "atcline/io.hpp"
#include "atcline/rng.hpp"
#include "atcline/util.hpp"

using namespace atcline;

namespace {

Trajectory straight_flight(const std::string& callsign, double lat0, double lon0,
                           double alt, double gs, double hdg, int n = 300) {
  Trajectory traj;
  traj.callsign = callsign;
  const double nmi_per_s = gs / 3600.0;
  const double dlat = nmi_per_s * std::cos(deg2rad(hdg)) / 60.0;
  const double dlon = nmi_per_s * std::sin(deg2rad(hdg)) / 60.0;
  for (int i = 0; i < n; ++i)
    traj.points.push_back(
        {static_cast<double>(i), lat0 + dlat * i, lon0 + dlon * i, alt, gs, hdg});
  return traj;
}

struct Scenario {
  std::vector<Trajectory> trajs;
  std::vector<AlignedPair> pairs;
};

// Five flights, four command-maneuver pairs each, all sequence windows covered.
Scenario make_scenario() {
  Scenario sc;
  const std::vector<std::string> signs = {"SIA101", "QFA202", "BAW303", "UAE404",
                                          "THA505"};
  std::vector<ParsedCommand> cmds;
  std::vector<ManeuverEvent> events;
  for (std::size_t f = 0; f < signs.size(); ++f) {
    sc.trajs.push_back(straight_flight(signs[f], 1.15 + 0.1 * f, 103.6 + 0.15 * f,
                                       9000.0 + 1000.0 * f, 230.0 + 15.0 * f,
                                       45.0 * f));
    for (int k = 0; k < 4; ++k) {
      const double onset = 80.0 + 50.0 * k;
      const double offset = 8.0 + f + k;
      ParsedCommand c;
      c.callsign = signs[f];
      c.ctype = kAllChannels[k % 3];
      c.value = c.ctype == Channel::altitude ? 8000 + 500 * k
                : c.ctype == Channel::speed  ? 210 + 10 * k
                                             : 90 + 20 * k;
      c.duration_s = 3.0 + 0.25 * k;
      c.start_t = onset - offset - c.duration_s;
      cmds.push_back(c);
      ManeuverEvent e;
      e.callsign = signs[f];
      e.channel = c.ctype;
      e.onset_t = onset;
      e.from_value = 250.0;
      e.to_value = 220.0;
      events.push_back(e);
    }
  }
  sc.pairs = align(cmds, events, {}).pairs;
  return sc;
}

DatasetConfig small_cfg(std::uint64_t seed = 7) {
  DatasetConfig cfg;
  cfg.seed = seed;
  cfg.raster.width = 32;
  cfg.raster.height = 32;
  return cfg;
}

bool same_files(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::set<std::string> rel_a, rel_b;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a))
    if (e.is_regular_file()) rel_a.insert(std::filesystem::relative(e.path(), a).string());
  for (const auto& e : std::filesystem::recursive_directory_iterator(b))
    if (e.is_regular_file()) rel_b.insert(std::filesystem::relative(e.path(), b).string());
  if (rel_a != rel_b) return false;
  for (const auto& rel : rel_a)
    if (read_binary_file(a / rel) != read_binary_file(b / rel)) return false;
  return true;
}

}  // namespace

TEST_CASE("dataset splits 20 samples into 16/4 disjoint flight groups") {
  const auto sc = make_scenario();
  REQUIRE(sc.pairs.size() == 20);
  const auto ds = build_dataset(sc.pairs, sc.trajs, {}, small_cfg());
  CHECK(ds.samples.size() == 20);
  CHECK(ds.dropped == 0);
  CHECK(ds.train_idx.size() == 16);
  CHECK(ds.val_idx.size() == 4);

  std::map<std::string, std::set<bool>> group_sides;
  std::set<std::size_t> seen;
  for (const auto i : ds.train_idx) {
    group_sides[ds.samples[i].group].insert(true);
    seen.insert(i);
  }
  for (const auto i : ds.val_idx) {
    group_sides[ds.samples[i].group].insert(false);
    seen.insert(i);
  }
  CHECK(seen.size() == 20);
  for (const auto& [group, sides] : group_sides) {
    CAPTURE(group);
    CHECK(sides.size() == 1);  // a flight-day never spans both splits
  }
}

TEST_CASE("label bookkeeping identity holds for every sample") {
  const auto sc = make_scenario();
  const auto ds = build_dataset(sc.pairs, sc.trajs, {}, small_cfg());
  std::set<std::pair<std::string, double>> cmd_ids, event_ids;
  for (const auto& s : ds.samples) {
    CHECK(std::fabs(s.cmd.start_t + s.duration_s + s.time_offset_s -
                    s.event.onset_t) <= 1e-9);
    CHECK(s.duration_s > 0.0);
    cmd_ids.insert({s.callsign, s.cmd.start_t});
    event_ids.insert({s.callsign, s.event.onset_t});
  }
  // No command or event is consumed twice.
  CHECK(cmd_ids.size() == ds.samples.size());
  CHECK(event_ids.size() == ds.samples.size());
}

TEST_CASE("standardized training features have zero mean and unit variance") {
  const auto sc = make_scenario();
  const auto ds = build_dataset(sc.pairs, sc.trajs, {}, small_cfg());
  const std::size_t dims = StructuredFeatures::count();

  // Raw per-slot spread decides which slots the oracle checks.
  std::vector<double> raw_min(dims, 1e300), raw_max(dims, -1e300);
  for (const auto i : ds.train_idx)
    for (std::size_t d = 0; d < dims; ++d) {
      raw_min[d] = std::min(raw_min[d], ds.samples[i].features.values[d]);
      raw_max[d] = std::max(raw_max[d], ds.samples[i].features.values[d]);
    }

  std::vector<double> sum(dims, 0.0), sumsq(dims, 0.0);
  for (const auto i : ds.train_idx) {
    const auto z = standardized_features(ds.stats, ds.samples[i]);
    for (std::size_t d = 0; d < dims; ++d) {
      sum[d] += z[d];
      sumsq[d] += z[d] * z[d];
    }
  }
  const double n = static_cast<double>(ds.train_idx.size());
  int varying = 0;
  for (std::size_t d = 0; d < dims; ++d) {
    const double mean = sum[d] / n;
    const double var = sumsq[d] / n - mean * mean;
    if (raw_max[d] - raw_min[d] < 1e-9) continue;  // constant slots exempt
    ++varying;
    CAPTURE(StructuredFeatures::names()[d]);
    CHECK(std::fabs(mean) <= 1e-9);
    CHECK(std::fabs(std::sqrt(var) - 1.0) <= 1e-6);
  }
  CHECK(varying >= 8);

  // Validation statistics never feed the stored moments: a train-only oracle
  // reproduces them exactly.
  std::vector<double> tsum(dims, 0.0), tsumsq(dims, 0.0);
  for (const auto i : ds.train_idx)
    for (std::size_t d = 0; d < dims; ++d) {
      const double v = ds.samples[i].features.values[d];
      tsum[d] += v;
      tsumsq[d] += v * v;
    }
  for (std::size_t d = 0; d < dims; ++d) {
    const double mean = tsum[d] / n;
    CHECK(ds.stats.features.mean[d] == doctest::Approx(mean).epsilon(1e-12));
    const double sd = std::sqrt(std::max(0.0, tsumsq[d] / n - mean * mean));
    if (sd >= 1e-12)
      CHECK(ds.stats.features.stdev[d] == doctest::Approx(sd).epsilon(1e-12));
    else
      CHECK(ds.stats.features.stdev[d] == 1.0);
  }
}

TEST_CASE("sequence rows reproduce interpolated states ending at onset") {
  const auto sc = make_scenario();
  const auto ds = build_dataset(sc.pairs, sc.trajs, {}, small_cfg());
  const auto& s = ds.samples.front();
  const Trajectory* traj = nullptr;
  for (const auto& t : sc.trajs)
    if (t.callsign == s.callsign) traj = &t;
  REQUIRE(traj != nullptr);
  REQUIRE(s.sequence.size() == 60u * kSequenceChannels);
  for (int k = 0; k < 60; ++k) {
    const auto st = state_at(*traj, s.event.onset_t - 59.0 + k);
    CHECK(s.sequence[k * 4 + 0] == st.alt);
    CHECK(s.sequence[k * 4 + 1] == st.gs);
    CHECK(s.sequence[k * 4 + 2] == doctest::Approx(std::sin(deg2rad(st.hdg))));
    CHECK(s.sequence[k * 4 + 3] == doctest::Approx(std::cos(deg2rad(st.hdg))));
  }
}

TEST_CASE("sequence-window underrun drops the pair and counts it") {
  auto sc = make_scenario();
  AlignedPair early = sc.pairs.front();
  early.event.onset_t = 40.0;  // needs t = -19
  early.cmd.start_t = 20.0;
  sc.pairs.push_back(early);
  const auto ds = build_dataset(sc.pairs, sc.trajs, {}, small_cfg());
  CHECK(ds.samples.size() == 20);
  CHECK(ds.dropped == 1);
}

TEST_CASE("dataset files round-trip and rebuilds are byte-identical") {
  const auto base = std::filesystem::temp_directory_path() / "atcline_ds";
  std::filesystem::remove_all(base);
  const auto sc = make_scenario();
  const auto ds = build_dataset(sc.pairs, sc.trajs, {}, small_cfg());
  save_dataset(base / "a", ds);
  const auto ds2 = build_dataset(sc.pairs, sc.trajs, {}, small_cfg());
  save_dataset(base / "b", ds2);
  CHECK(same_files(base / "a", base / "b"));

  const auto loaded = load_dataset(base / "a");
  REQUIRE(loaded.samples.size() == ds.samples.size());
  CHECK(loaded.train_idx == ds.train_idx);
  CHECK(loaded.val_idx == ds.val_idx);
  CHECK(loaded.stats.features.mean == ds.stats.features.mean);
  CHECK(loaded.stats.features.stdev == ds.stats.features.stdev);
  CHECK(loaded.stats.sequence.mean == ds.stats.sequence.mean);
  CHECK(loaded.stats.targets.mean == ds.stats.targets.mean);
  CHECK(loaded.schema_hash == ds.schema_hash);
  for (std::size_t i = 0; i < loaded.samples.size(); ++i) {
    const auto& a = loaded.samples[i];
    const auto& b = ds.samples[i];
    CHECK(a.callsign == b.callsign);
    CHECK(a.group == b.group);
    CHECK(a.cmd.start_t == b.cmd.start_t);
    CHECK(a.event.onset_t == b.event.onset_t);
    CHECK(a.time_offset_s == b.time_offset_s);
    CHECK(a.duration_s == b.duration_s);
    CHECK(a.features.values == b.features.values);
    CHECK(a.sequence == b.sequence);
    CHECK(a.history_image.pixels == b.history_image.pixels);
    CHECK(a.snapshot_image.pixels == b.snapshot_image.pixels);
  }
  std::filesystem::remove_all(base);
}

TEST_CASE("dataset build is independent of thread count") {
  const auto sc = make_scenario();
  const auto a = build_dataset(sc.pairs, sc.trajs, {}, small_cfg(), 1);
  const auto b = build_dataset(sc.pairs, sc.trajs, {}, small_cfg(), 4);
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.train_idx == b.train_idx);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].features.values == b.samples[i].features.values);
    CHECK(a.samples[i].sequence == b.samples[i].sequence);
    CHECK(a.samples[i].history_image.pixels == b.samples[i].history_image.pixels);
    CHECK(a.samples[i].snapshot_image.pixels == b.samples[i].snapshot_image.pixels);
  }
}

TEST_CASE("schema drift is rejected on load") {
  const auto base = std::filesystem::temp_directory_path() / "atcline_ds_drift";
  std::filesystem::remove_all(base);
  const auto sc = make_scenario();
  save_dataset(base, build_dataset(sc.pairs, sc.trajs, {}, small_cfg()));
  auto schema = read_text_file(base / "schema.json");
  const auto pos = schema.find("\"cas\"");
  REQUIRE(pos != std::string::npos);
  schema.replace(pos, 5, "\"xxx\"");
  write_text_file(base / "schema.json", schema);
  CHECK_THROWS_AS(load_dataset(base), SchemaMismatch);
  std::filesystem::remove_all(base);
}

TEST_CASE("standardize and destandardize invert each other") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * 40.0 + 10.0;
    const double mean = rng.normal() * 5.0;
    const double sd = 0.1 + rng.uniform() * 20.0;
    CHECK(std::fabs(destandardize(standardize(v, mean, sd), mean, sd) - v) <= 1e-9);
  }
}

TEST_CASE("degenerate dataset configs are rejected") {
  DatasetConfig cfg;
  cfg.train_frac = 0.0;
  CHECK_THROWS_AS(cfg.validate(), BadConfig);
  DatasetConfig cfg2;
  cfg2.sequence_len = 1;
  CHECK_THROWS_AS(cfg2.validate(), BadConfig);
}
