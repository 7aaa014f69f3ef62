#include "atcline/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "atcline/io.hpp"
#include "atcline/rng.hpp"
#include "atcline/util.hpp"

namespace atcline {

namespace {

// One channel ramp: value holds at `from` until onset, moves at signed rate
// for `duration` seconds, then holds at `to`.
struct Transition {
  Channel ch = Channel::altitude;
  double onset = 0.0;
  double rate = 0.0;
  double duration = 0.0;
  double from = 0.0;
  double to = 0.0;
};

double value_at(double t, double v0, const std::vector<Transition>& trans) {
  double v = v0;
  for (const auto& tr : trans) {
    if (t <= tr.onset) return v;
    if (t >= tr.onset + tr.duration) {
      v = tr.to;
      continue;
    }
    const double ramped = tr.from + tr.rate * (t - tr.onset);
    return tr.ch == Channel::heading ? wrap360(ramped) : ramped;
  }
  return v;
}

int channel_index(Channel c) {
  return c == Channel::altitude ? 0 : c == Channel::speed ? 1 : 2;
}

// Wake classes per airline prefix; heavies dominate the builtin long-haul set.
const std::vector<std::pair<std::string, char>>& wtc_rows() {
  static const std::vector<std::pair<std::string, char>> rows = {
      {"BAW", 'H'}, {"QFA", 'H'}, {"SIA", 'H'}, {"TGW", 'M'}, {"SLK", 'M'},
      {"JSA", 'M'}, {"CPA", 'H'}, {"UAE", 'J'}, {"DLH", 'H'}, {"AFR", 'H'},
      {"GIA", 'M'}, {"MAS", 'M'}, {"THA", 'H'}, {"VOZ", 'M'}};
  return rows;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_flights < 0) throw BadConfig("n_flights must be nonnegative");
  if (min_maneuvers < 0 || max_maneuvers < min_maneuvers)
    throw BadConfig("maneuver count range is empty");
  for (const Channel c : kAllChannels) {
    if (noise_sigma.get(c) < 0.0) throw BadConfig("noise sigma must be nonnegative");
    if (transition_rate.get(c) <= 0.0)
      throw BadConfig("transition rates must be positive");
  }
  if (offset_sigma_s < 0.0) throw BadConfig("offset sigma must be nonnegative");
  if (!(duration_min_s > 0.0 && duration_min_s < duration_max_s))
    throw BadConfig("duration clip range is empty");
  // Detection needs the stability window plus the minimum platform length on
  // both sides of a transition; anything shorter cannot be found.
  if (platform_min_s < 45.0)
    throw BadConfig("platforms under 45 s are below the detection floor");
  if (platform_max_s < platform_min_s) throw BadConfig("platform range is empty");
}

Scenario generate_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto table = CallsignTable::builtin();
  const auto codes = table.entries();

  Scenario sc;
  sc.wtc = wtc_rows();
  double scenario_end = cfg.t0;

  for (int f = 0; f < cfg.n_flights; ++f) {
    const std::string callsign =
        codes[f % codes.size()].second + std::to_string(100 + f);
    const double t_start = std::floor(cfg.t0 + f * cfg.start_stagger_s);
    const int n_man = static_cast<int>(
        rng.uniform_int(cfg.min_maneuvers, cfg.max_maneuvers));

    double alt = 100.0 * static_cast<double>(rng.uniform_int(80, 200));
    double gs = static_cast<double>(rng.uniform_int(220, 300));
    double hdg = static_cast<double>(rng.uniform_int(0, 359));
    const double lat0 = rng.uniform(1.12, 1.68);
    const double lon0 = rng.uniform(103.55, 104.45);
    const double v0[3] = {alt, gs, hdg};

    std::vector<Transition> per_channel[3];
    std::vector<Transition> ordered;
    double cursor = t_start;
    for (int m = 0; m < n_man; ++m) {
      cursor += static_cast<double>(rng.uniform_int(
          static_cast<long long>(cfg.platform_min_s),
          static_cast<long long>(cfg.platform_max_s)));
      const double onset = cursor;
      const Channel ch = kAllChannels[rng.uniform_int(0, 2)];

      Transition tr;
      tr.ch = ch;
      tr.onset = onset;
      Direction turn = Direction::none;
      if (ch == Channel::altitude) {
        const double delta = 100.0 * static_cast<double>(rng.uniform_int(8, 18));
        const bool can_desc = alt - delta >= 6000.0;
        const bool can_climb = alt + delta <= 22000.0;
        const bool desc = can_desc && (!can_climb || rng.bernoulli(0.7));
        tr.from = alt;
        tr.to = desc ? alt - delta : alt + delta;
        alt = tr.to;
      } else if (ch == Channel::speed) {
        const double delta = static_cast<double>(rng.uniform_int(15, 45));
        const bool can_red = gs - delta >= 170.0;
        const bool can_inc = gs + delta <= 340.0;
        const bool red = can_red && (!can_inc || rng.bernoulli(0.7));
        tr.from = gs;
        tr.to = red ? gs - delta : gs + delta;
        gs = tr.to;
      } else {
        const double delta = static_cast<double>(rng.uniform_int(25, 90));
        turn = rng.bernoulli(0.5) ? Direction::left : Direction::right;
        tr.from = hdg;
        tr.to = wrap360(turn == Direction::left ? hdg - delta : hdg + delta);
        hdg = tr.to;
      }
      const double rate = cfg.transition_rate.get(ch);
      // Signed change; turns are < 180 deg so the wrapped difference keeps
      // the chosen turn direction.
      double span = tr.to - tr.from;
      if (ch == Channel::heading) span = heading_diff(tr.to, tr.from);
      tr.duration = std::fabs(span) / rate;
      tr.rate = span >= 0.0 ? rate : -rate;
      per_channel[channel_index(ch)].push_back(tr);
      ordered.push_back(tr);
      cursor = onset + std::ceil(tr.duration);

      // Planted command: canonical phraseology timed so that onset equals
      // command end plus the sampled offset.
      ParsedCommand cmd;
      cmd.callsign = callsign;
      cmd.ctype = ch;
      cmd.value = static_cast<long long>(std::llround(tr.to));
      if (ch == Channel::heading) cmd.direction = turn;
      const double dur_mean = ch == Channel::altitude ? cfg.duration_mean_altitude_s
                              : ch == Channel::speed  ? cfg.duration_mean_speed_s
                                                      : cfg.duration_mean_heading_s;
      cmd.duration_s = rng.truncated_normal(dur_mean, cfg.duration_sigma_s,
                                            cfg.duration_min_s, cfg.duration_max_s);
      const double off_mean =
          ch == Channel::speed
              ? cfg.offset_mean_s + 2.0 * cfg.speed_offset_bonus_s / 3.0
              : cfg.offset_mean_s - cfg.speed_offset_bonus_s / 3.0;
      const double offset =
          rng.truncated_normal(off_mean, cfg.offset_sigma_s, cfg.offset_min_s);
      cmd.start_t = onset - offset - cmd.duration_s;

      TranscriptUtterance cu;
      cu.start_t = cmd.start_t;
      cu.duration_s = cmd.duration_s;
      cu.speaker = Speaker::atco;
      cu.text = render_command(cmd, table);
      sc.transcript.push_back(cu);

      if (cfg.pilot_readbacks && rng.bernoulli(0.5)) {
        TranscriptUtterance rb;
        rb.start_t = cmd.end_t() + rng.uniform(1.0, 3.0);
        rb.duration_s = rng.uniform(1.5, 3.0);
        rb.speaker = Speaker::pilot;
        rb.text = cu.text;
        sc.transcript.push_back(rb);
      }

      TruthEvent ev;
      ev.callsign = callsign;
      ev.channel = ch;
      ev.onset_t = onset;
      ev.from_value = tr.from;
      ev.to_value = tr.to;
      ev.cmd = cmd;
      ev.offset_s = onset - cmd.end_t();
      sc.truth.events.push_back(ev);
    }
    cursor += static_cast<double>(rng.uniform_int(
        static_cast<long long>(cfg.platform_min_s),
        static_cast<long long>(cfg.platform_max_s)));
    const double t_end = cursor;
    scenario_end = std::max(scenario_end, t_end);

    // True platform segments per channel, bounded by that channel's ramps.
    for (const Channel ch : kAllChannels) {
      const auto& trans = per_channel[channel_index(ch)];
      double seg_start = t_start;
      double seg_value = v0[channel_index(ch)];
      for (const auto& tr : trans) {
        sc.truth.platforms.push_back({callsign, ch, seg_start, tr.onset, seg_value});
        seg_start = tr.onset + std::ceil(tr.duration);
        seg_value = tr.to;
      }
      sc.truth.platforms.push_back({callsign, ch, seg_start, t_end, seg_value});
    }

    if (cfg.chatter && rng.bernoulli(0.4)) {
      TranscriptUtterance ch;
      ch.start_t = t_start + rng.uniform(20.0, t_end - t_start - 20.0);
      ch.duration_s = rng.uniform(2.0, 4.0);
      ch.speaker = Speaker::atco;
      const auto alias = table.alias_for(callsign.substr(0, 3));
      std::string digits;
      for (std::size_t i = 3; i < callsign.size(); ++i) {
        digits += ' ';
        digits += spell_digits(callsign[i] - '0');
      }
      ch.text = *alias + digits + " contact approach one two zero decimal three";
      sc.transcript.push_back(ch);
    }

    // Sampled track: true piecewise values plus channel noise; position
    // integrates the true kinematics.
    Trajectory traj;
    traj.callsign = callsign;
    double lat = lat0, lon = lon0;
    for (double t = t_start; t <= t_end; t += 1.0) {
      const double a = value_at(t, v0[0], per_channel[0]);
      const double g = value_at(t, v0[1], per_channel[1]);
      const double h = value_at(t, v0[2], per_channel[2]);
      TrackPoint p;
      p.t = t;
      p.lat = lat;
      p.lon = lon;
      p.alt = std::max(0.0, a + rng.normal(0.0, cfg.noise_sigma.altitude));
      p.gs = std::max(0.0, g + rng.normal(0.0, cfg.noise_sigma.speed));
      p.hdg = wrap360(h + rng.normal(0.0, cfg.noise_sigma.heading));
      traj.points.push_back(p);
      const double d_nmi = g / 3600.0;
      lat += d_nmi * std::cos(deg2rad(h)) / 60.0;
      lon += d_nmi * std::sin(deg2rad(h)) / (60.0 * std::cos(deg2rad(lat)));
    }
    sc.trajs.push_back(std::move(traj));
  }

  std::stable_sort(sc.transcript.begin(), sc.transcript.end(),
                   [](const TranscriptUtterance& a, const TranscriptUtterance& b) {
                     return a.start_t < b.start_t;
                   });

  // Half-hourly weather spanning the whole scenario.
  for (double t = std::floor(cfg.t0) - 3600.0; t <= scenario_end + 3600.0;
       t += 1800.0) {
    WeatherRecord w;
    w.t = t;
    w.wind_speed = rng.uniform(5.0, 25.0);
    w.wind_dir = static_cast<double>(rng.uniform_int(0, 359));
    w.visibility = static_cast<double>(rng.uniform_int(6000, 10000));
    sc.weather.push_back(w);
  }
  return sc;
}

void save_scenario(const std::filesystem::path& dir, const Scenario& sc) {
  std::filesystem::create_directories(dir);
  save_trajectories_csv(dir / "tracks.csv", sc.trajs);
  save_transcript_tsv(dir / "transcript.tsv", sc.transcript);
  save_truth_jsonl(dir / "truth.jsonl", sc.truth);

  std::string aliases = "alias,icao\n";
  for (const auto& [alias, icao] : CallsignTable::builtin().entries())
    aliases += alias + "," + icao + "\n";
  write_text_file(dir / "aliases.csv", aliases);

  std::string actypes = "type,wtc\n";
  for (const auto& [prefix, wtc] : sc.wtc)
    actypes += prefix + "," + std::string(1, wtc) + "\n";
  write_text_file(dir / "actypes.csv", actypes);

  std::string weather = "t,wind_speed,wind_dir,visibility\n";
  for (const auto& w : sc.weather)
    weather += fmt_double(w.t) + "," + fmt_double(w.wind_speed) + "," +
               fmt_double(w.wind_dir) + "," + fmt_double(w.visibility) + "\n";
  write_text_file(dir / "weather.csv", weather);
}

void save_truth_jsonl(const std::filesystem::path& path, const GroundTruth& truth) {
  std::string buf;
  for (const auto& p : truth.platforms) {
    nlohmann::ordered_json j;
    j["kind"] = "platform";
    j["callsign"] = p.callsign;
    j["channel"] = channel_name(p.channel);
    j["t_start"] = p.t_start;
    j["t_end"] = p.t_end;
    j["value"] = p.value;
    buf += j.dump();
    buf += '\n';
  }
  for (const auto& e : truth.events) {
    nlohmann::ordered_json j;
    j["kind"] = "event";
    j["callsign"] = e.callsign;
    j["channel"] = channel_name(e.channel);
    j["onset_t"] = e.onset_t;
    j["from_value"] = e.from_value;
    j["to_value"] = e.to_value;
    nlohmann::ordered_json cj;
    cj["ctype"] = channel_name(e.cmd.ctype);
    cj["value"] = e.cmd.value;
    cj["direction"] = direction_name(e.cmd.direction);
    cj["start_t"] = e.cmd.start_t;
    cj["duration_s"] = e.cmd.duration_s;
    j["cmd"] = cj;
    j["offset_s"] = e.offset_s;
    buf += j.dump();
    buf += '\n';
  }
  write_text_file(path, buf);
}

GroundTruth load_truth_jsonl(const std::filesystem::path& path) {
  GroundTruth truth;
  for (const auto& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "platform") {
      TruthPlatform p;
      p.callsign = j.at("callsign").get<std::string>();
      p.channel = channel_from_name(j.at("channel").get<std::string>());
      p.t_start = j.at("t_start").get<double>();
      p.t_end = j.at("t_end").get<double>();
      p.value = j.at("value").get<double>();
      truth.platforms.push_back(std::move(p));
    } else {
      TruthEvent e;
      e.callsign = j.at("callsign").get<std::string>();
      e.channel = channel_from_name(j.at("channel").get<std::string>());
      e.onset_t = j.at("onset_t").get<double>();
      e.from_value = j.at("from_value").get<double>();
      e.to_value = j.at("to_value").get<double>();
      const auto& cj = j.at("cmd");
      e.cmd.callsign = e.callsign;
      e.cmd.ctype = channel_from_name(cj.at("ctype").get<std::string>());
      e.cmd.value = cj.at("value").get<long long>();
      e.cmd.direction = direction_from_name(cj.at("direction").get<std::string>());
      e.cmd.start_t = cj.at("start_t").get<double>();
      e.cmd.duration_s = cj.at("duration_s").get<double>();
      e.offset_s = j.at("offset_s").get<double>();
      truth.events.push_back(std::move(e));
    }
  }
  return truth;
}

}  // namespace atcline
