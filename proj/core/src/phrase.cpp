#include "atcline/phrase.hpp"

#include <algorithm>
#include <array>

#include <json.hpp>

#include "atcline/io.hpp"
#include "atcline/util.hpp"

namespace atcline {

namespace {

constexpr std::array<std::pair<const char*, const char*>, 14> kBuiltinAliases{{
    {"speedbird", "BAW"},
    {"qantas", "QFA"},
    {"singapore", "SIA"},
    {"tiger", "TGW"},
    {"silkair", "SLK"},
    {"jetstar", "JSA"},
    {"cathay", "CPA"},
    {"emirates", "UAE"},
    {"lufthansa", "DLH"},
    {"air france", "AFR"},
    {"garuda", "GIA"},
    {"malaysian", "MAS"},
    {"thai", "THA"},
    {"velocity", "VOZ"},
}};

bool is_icao_code(const std::string& s) {
  if (s.size() != 3) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
}

// Literal callsign token: 3 letters, 1-4 digits, up to 2 suffix letters.
bool is_bare_callsign(const std::string& tok) {
  if (tok.size() < 4 || tok.size() > 9) return false;
  std::size_t i = 0;
  for (; i < 3; ++i)
    if (!(tok[i] >= 'a' && tok[i] <= 'z')) return false;
  std::size_t digits = 0;
  while (i < tok.size() && tok[i] >= '0' && tok[i] <= '9') {
    ++digits;
    ++i;
  }
  if (digits < 1 || digits > 4) return false;
  std::size_t letters = 0;
  while (i < tok.size() && tok[i] >= 'a' && tok[i] <= 'z') {
    ++letters;
    ++i;
  }
  return i == tok.size() && letters <= 2;
}

struct GroupHit {
  bool present = false;
  std::size_t first_index = static_cast<std::size_t>(-1);
};

// Multi-word keyword entries match consecutive tokens.
GroupHit find_group(const std::vector<std::string>& tokens,
                    const std::vector<std::string>& keywords) {
  GroupHit hit;
  for (const auto& entry : keywords) {
    const auto words = split(entry, ' ');
    if (words.empty()) continue;
    for (std::size_t i = 0; i + words.size() <= tokens.size(); ++i) {
      bool match = true;
      for (std::size_t w = 0; w < words.size(); ++w)
        if (tokens[i + w] != words[w]) {
          match = false;
          break;
        }
      if (match) {
        hit.present = true;
        hit.first_index = std::min(hit.first_index, i);
        break;
      }
    }
  }
  return hit;
}

struct NumberParse {
  long long value = 0;
  std::size_t next = 0;
};

// Consecutive digit words concatenate; "thousand"/"hundred" scale, with an
// optional "<digits> hundred" continuation after "thousand".
std::optional<NumberParse> parse_number_at(const std::vector<std::string>& tokens,
                                           std::size_t i, const PhraseRules& rules) {
  long long concat = 0;
  std::size_t ndigits = 0;
  std::size_t j = i;
  while (j < tokens.size() && rules.digit_words.count(tokens[j]) && ndigits < 6) {
    concat = concat * 10 + rules.digit_words.at(tokens[j]);
    ++ndigits;
    ++j;
  }
  if (ndigits == 0) return std::nullopt;
  if (j < tokens.size() && tokens[j] == "thousand") {
    long long value = concat * 1000;
    ++j;
    std::size_t k = j;
    long long hu = 0;
    std::size_t hdigits = 0;
    while (k < tokens.size() && rules.digit_words.count(tokens[k]) && hdigits < 2) {
      hu = hu * 10 + rules.digit_words.at(tokens[k]);
      ++hdigits;
      ++k;
    }
    if (hdigits > 0 && k < tokens.size() && tokens[k] == "hundred") {
      value += hu * 100;
      j = k + 1;
    }
    return NumberParse{value, j};
  }
  if (j < tokens.size() && tokens[j] == "hundred")
    return NumberParse{concat * 100, j + 1};
  return NumberParse{concat, j};
}

std::optional<long long> first_number_after(const std::vector<std::string>& tokens,
                                            std::size_t from,
                                            const PhraseRules& rules) {
  for (std::size_t j = from; j < tokens.size(); ++j)
    if (const auto n = parse_number_at(tokens, j, rules)) return n->value;
  return std::nullopt;
}

// Position just past a "flight level" bigram, if one exists.
std::optional<std::size_t> flight_level_position(
    const std::vector<std::string>& tokens) {
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    if (tokens[i] == "flight" && tokens[i + 1] == "level") return i + 2;
  return std::nullopt;
}

std::string speaker_name(Speaker s) {
  switch (s) {
    case Speaker::atco: return "atco";
    case Speaker::pilot: return "pilot";
    default: return "unknown";
  }
}

Speaker speaker_from_name(std::string_view s) {
  if (s == "atco") return Speaker::atco;
  if (s == "pilot") return Speaker::pilot;
  if (s == "unknown") return Speaker::unknown;
  throw IoError("unknown speaker label: " + std::string(s));
}

const char* kDigitNames[10] = {"zero", "one", "two",   "three", "four",
                               "five", "six", "seven", "eight", "nine"};

}  // namespace

std::string direction_name(Direction d) {
  switch (d) {
    case Direction::left: return "left";
    case Direction::right: return "right";
    default: return "none";
  }
}

Direction direction_from_name(const std::string& s) {
  if (s == "left") return Direction::left;
  if (s == "right") return Direction::right;
  return Direction::none;
}

std::string parse_status_name(ParseStatus s) {
  switch (s) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::no_callsign: return "no_callsign";
    case ParseStatus::not_a_command: return "not_a_command";
    case ParseStatus::missing_value: return "missing_value";
    default: return "wrong_speaker";
  }
}

CallsignTable CallsignTable::builtin() {
  CallsignTable t;
  for (const auto& [alias, icao] : kBuiltinAliases) t.add(alias, icao);
  return t;
}

CallsignTable CallsignTable::from_csv(const std::filesystem::path& path) {
  CallsignTable t;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || (i == 0 && line == "alias,icao")) continue;
    const auto f = split(line, ',');
    if (f.size() != 2)
      throw IoError("bad alias row " + std::to_string(i + 1) + " in " + path.string());
    t.add(std::string(trim(f[0])), std::string(trim(f[1])));
  }
  return t;
}

void CallsignTable::add(const std::string& alias, const std::string& icao) {
  if (!is_icao_code(icao))
    throw BadConfig("ICAO code must be three uppercase letters: " + icao);
  const auto lowered = to_lower(trim(alias));
  auto words_view = split(lowered, ' ');
  std::vector<std::string> words;
  for (const auto w : words_view)
    if (!w.empty()) words.emplace_back(w);
  if (words.empty()) throw BadConfig("empty airline alias");
  for (const auto& [existing, _] : aliases_)
    if (existing == words) throw BadConfig("duplicate airline alias: " + lowered);
  aliases_.emplace_back(std::move(words), icao);
  first_alias_.emplace(icao, lowered);  // keeps the first registration
}

std::optional<std::pair<std::string, int>> CallsignTable::match_alias(
    const std::vector<std::string>& tokens, std::size_t start) const {
  std::optional<std::pair<std::string, int>> best;
  for (const auto& [words, icao] : aliases_) {
    if (start + words.size() > tokens.size()) continue;
    bool match = true;
    for (std::size_t w = 0; w < words.size(); ++w)
      if (tokens[start + w] != words[w]) {
        match = false;
        break;
      }
    if (match && (!best || static_cast<int>(words.size()) > best->second))
      best = {icao, static_cast<int>(words.size())};
  }
  return best;
}

std::optional<std::string> CallsignTable::alias_for(const std::string& icao) const {
  const auto it = first_alias_.find(icao);
  if (it == first_alias_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<std::string, std::string>> CallsignTable::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(aliases_.size());
  for (const auto& [tokens, icao] : aliases_) {
    std::string alias;
    for (const auto& tok : tokens) {
      if (!alias.empty()) alias += ' ';
      alias += tok;
    }
    out.emplace_back(alias, icao);
  }
  return out;
}

PhraseRules PhraseRules::builtin() {
  PhraseRules r;
  r.altitude_keywords = {"descend", "climb", "maintain", "flight level"};
  r.speed_keywords = {"speed", "reduce", "increase", "knots"};
  r.heading_keywords = {"heading", "turn"};
  r.conditional_tokens = {"after", "when", "passing", "until", "then", "report"};
  for (int d = 0; d < 10; ++d) r.digit_words[kDigitNames[d]] = d;
  r.digit_words["niner"] = 9;
  const char* letters[26] = {"alpha",  "bravo",   "charlie", "delta",  "echo",
                             "foxtrot", "golf",    "hotel",   "india",  "juliett",
                             "kilo",   "lima",    "mike",    "november", "oscar",
                             "papa",   "quebec",  "romeo",   "sierra", "tango",
                             "uniform", "victor", "whiskey", "xray",   "yankee",
                             "zulu"};
  for (int i = 0; i < 26; ++i)
    r.phonetic_letters[letters[i]] = static_cast<char>('a' + i);
  r.phonetic_letters["juliet"] = 'j';
  return r;
}

PhraseRules PhraseRules::from_json(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_text_file(path));
  PhraseRules r;
  r.altitude_keywords = j.at("altitude_keywords").get<std::vector<std::string>>();
  r.speed_keywords = j.at("speed_keywords").get<std::vector<std::string>>();
  r.heading_keywords = j.at("heading_keywords").get<std::vector<std::string>>();
  r.conditional_tokens = j.at("conditional_tokens").get<std::vector<std::string>>();
  for (const auto& [word, value] : j.at("digit_words").items())
    r.digit_words[word] = value.get<int>();
  for (const auto& [word, letter] : j.at("phonetic_letters").items())
    r.phonetic_letters[word] = letter.get<std::string>().at(0);
  r.maintain_is_altitude = j.value("maintain_is_altitude", true);
  return r;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (const char raw : text) {
    const char c = (raw >= 'A' && raw <= 'Z') ? static_cast<char>(raw + 32) : raw;
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (keep) {
      cur += c;
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

CallsignMatch parse_callsign(const std::vector<std::string>& tokens,
                             const CallsignTable& table,
                             const PhraseRules& rules) {
  if (tokens.empty()) throw NoCallsign("empty utterance");

  if (const auto alias = table.match_alias(tokens, 0)) {
    std::size_t i = static_cast<std::size_t>(alias->second);
    std::string digits;
    while (i < tokens.size() && digits.size() < 4 &&
           rules.digit_words.count(tokens[i])) {
      digits += static_cast<char>('0' + rules.digit_words.at(tokens[i]));
      ++i;
    }
    if (!digits.empty()) {
      std::string suffix;
      while (i < tokens.size() && suffix.size() < 2 &&
             rules.phonetic_letters.count(tokens[i])) {
        suffix += static_cast<char>(rules.phonetic_letters.at(tokens[i]) - 32);
        ++i;
      }
      return {alias->first + digits + suffix,
              std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                       tokens.end())};
    }
  }

  if (is_bare_callsign(tokens[0]))
    return {to_upper(tokens[0]),
            std::vector<std::string>(tokens.begin() + 1, tokens.end())};

  throw NoCallsign("no airline alias or literal callsign at utterance start");
}

ParseResult parse_utterance(const TranscriptUtterance& u, const CallsignTable& table,
                            const PhraseRules& rules) {
  ParseResult res;
  if (u.speaker != Speaker::atco) {
    res.status = ParseStatus::wrong_speaker;
    return res;
  }
  const auto tokens = tokenize(u.text);

  CallsignMatch cs;
  try {
    cs = parse_callsign(tokens, table, rules);
  } catch (const NoCallsign&) {
    res.status = ParseStatus::no_callsign;
    return res;
  }
  const auto& tail = cs.tail;

  std::vector<std::string> altitude_keywords;
  for (const auto& k : rules.altitude_keywords)
    if (k != "maintain" || rules.maintain_is_altitude) altitude_keywords.push_back(k);

  const GroupHit alt_hit = find_group(tail, altitude_keywords);
  const GroupHit spd_hit = find_group(tail, rules.speed_keywords);
  const GroupHit hdg_hit = find_group(tail, rules.heading_keywords);
  const int groups = int(alt_hit.present) + int(spd_hit.present) + int(hdg_hit.present);
  if (groups == 0) {
    res.status = ParseStatus::not_a_command;
    return res;
  }

  ParsedCommand cmd;
  cmd.callsign = cs.icao;
  cmd.start_t = u.start_t;
  cmd.duration_s = u.duration_s;
  cmd.compound = groups >= 2;
  cmd.conditional = false;
  for (const auto& tok : tail)
    if (std::find(rules.conditional_tokens.begin(), rules.conditional_tokens.end(),
                  tok) != rules.conditional_tokens.end()) {
      cmd.conditional = true;
      break;
    }

  // The earliest keyword hit decides the command type of mixed utterances.
  struct Candidate {
    Channel type;
    GroupHit hit;
  };
  std::vector<Candidate> candidates{{Channel::altitude, alt_hit},
                                    {Channel::speed, spd_hit},
                                    {Channel::heading, hdg_hit}};
  std::size_t best_index = static_cast<std::size_t>(-1);
  for (const auto& c : candidates)
    if (c.hit.present && c.hit.first_index < best_index) {
      best_index = c.hit.first_index;
      cmd.ctype = c.type;
    }

  std::optional<long long> value;
  const auto fl = flight_level_position(tail);
  if (cmd.ctype == Channel::altitude && fl) {
    if (const auto n = parse_number_at(tail, *fl, rules)) value = n->value * 100;
  } else {
    value = first_number_after(tail, best_index, rules);
  }

  if (cmd.ctype == Channel::heading) {
    for (const auto& tok : tail) {
      if (tok == "left") {
        cmd.direction = Direction::left;
        break;
      }
      if (tok == "right") {
        cmd.direction = Direction::right;
        break;
      }
    }
    if (value && *value == 360) value = 0;
  }

  bool in_range = false;
  if (value) {
    switch (cmd.ctype) {
      case Channel::altitude: in_range = *value >= 0 && *value <= 60000; break;
      case Channel::speed: in_range = *value >= 80 && *value <= 600; break;
      case Channel::heading: in_range = *value >= 0 && *value < 360; break;
    }
  }

  if (value && in_range) {
    cmd.value = *value;
  } else if (cmd.flagged()) {
    cmd.value = 0;  // excluded downstream; value is never consumed
  } else {
    res.status = ParseStatus::missing_value;
    return res;
  }

  res.status = ParseStatus::ok;
  res.cmd = std::move(cmd);
  return res;
}

FilterResult filter_commands(const std::vector<ParsedCommand>& cmds) {
  FilterResult out;
  for (const auto& c : cmds)
    (c.flagged() ? out.excluded : out.kept).push_back(c);
  return out;
}

std::string spell_digits(long long value) {
  if (value < 0) throw OutOfRange("cannot spell negative value");
  const std::string s = std::to_string(value);
  std::string out;
  for (const char c : s) {
    if (!out.empty()) out += ' ';
    out += kDigitNames[c - '0'];
  }
  return out;
}

std::string spell_quantity(long long value) {
  if (value >= 1000 && value % 1000 == 0)
    return spell_digits(value / 1000) + " thousand";
  if (value >= 1000 && value % 100 == 0)
    return spell_digits(value / 1000) + " thousand " +
           spell_digits((value % 1000) / 100) + " hundred";
  if (value >= 100 && value < 1000 && value % 100 == 0)
    return spell_digits(value / 100) + " hundred";
  return spell_digits(value);
}

std::string render_command(const ParsedCommand& cmd, const CallsignTable& table) {
  const std::string code = cmd.callsign.substr(0, 3);
  std::string spoken;
  if (const auto alias = table.alias_for(code)) {
    spoken = *alias;
    for (std::size_t i = 3; i < cmd.callsign.size(); ++i) {
      const char c = cmd.callsign[i];
      spoken += ' ';
      if (c >= '0' && c <= '9') {
        spoken += kDigitNames[c - '0'];
      } else {
        // Reverse phonetic for suffix letters.
        static const char* kPhonetic[26] = {
            "alpha",  "bravo",   "charlie", "delta",  "echo",   "foxtrot",
            "golf",   "hotel",   "india",   "juliett", "kilo",  "lima",
            "mike",   "november", "oscar",  "papa",   "quebec", "romeo",
            "sierra", "tango",   "uniform", "victor", "whiskey", "xray",
            "yankee", "zulu"};
        spoken += kPhonetic[(c | 32) - 'a'];
      }
    }
  } else {
    spoken = to_lower(cmd.callsign);
  }

  std::string body;
  switch (cmd.ctype) {
    case Channel::altitude:
      body = "descend to " + spell_quantity(cmd.value);
      break;
    case Channel::speed:
      body = "reduce speed to " + spell_digits(cmd.value);
      break;
    case Channel::heading: {
      const long long v = cmd.value == 0 ? 360 : cmd.value;
      std::string padded = std::to_string(v);
      while (padded.size() < 3) padded.insert(padded.begin(), '0');
      std::string hdg;
      for (const char c : padded) {
        if (!hdg.empty()) hdg += ' ';
        hdg += kDigitNames[c - '0'];
      }
      if (cmd.direction == Direction::left) body = "turn left heading " + hdg;
      else if (cmd.direction == Direction::right) body = "turn right heading " + hdg;
      else body = "fly heading " + hdg;
      break;
    }
  }

  std::string phrase = spoken + " " + body;
  if (cmd.compound)
    phrase += cmd.ctype == Channel::speed ? " and fly present heading"
                                          : " and maintain present speed";
  if (cmd.conditional) phrase += " then report";
  return phrase;
}

std::vector<TranscriptUtterance> load_transcript_tsv(
    const std::filesystem::path& path) {
  std::vector<TranscriptUtterance> out;
  for (const auto& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    // Fourth field is free text; split only the first three tabs.
    std::array<std::size_t, 3> tabs{};
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
      pos = line.find('\t', pos);
      if (pos == std::string::npos)
        throw IoError("transcript row needs 4 tab-separated fields: " + line);
      tabs[static_cast<std::size_t>(k)] = pos++;
    }
    TranscriptUtterance u;
    u.start_t = parse_double(trim(line.substr(0, tabs[0])));
    u.duration_s = parse_double(trim(line.substr(tabs[0] + 1, tabs[1] - tabs[0] - 1)));
    u.speaker = speaker_from_name(trim(line.substr(tabs[1] + 1, tabs[2] - tabs[1] - 1)));
    u.text = std::string(trim(line.substr(tabs[2] + 1)));
    if (!(u.duration_s > 0.0))
      throw IoError("utterance duration must be positive: " + line);
    out.push_back(std::move(u));
  }
  return out;
}

void save_transcript_tsv(const std::filesystem::path& path,
                         const std::vector<TranscriptUtterance>& utterances) {
  std::string buf;
  for (const auto& u : utterances) {
    buf += fmt_double(u.start_t);
    buf += '\t';
    buf += fmt_double(u.duration_s);
    buf += '\t';
    buf += speaker_name(u.speaker);
    buf += '\t';
    buf += u.text;
    buf += '\n';
  }
  write_text_file(path, buf);
}

void save_commands_jsonl(const std::filesystem::path& path,
                         const std::vector<ParsedCommand>& cmds) {
  std::string buf;
  for (const auto& c : cmds) {
    nlohmann::ordered_json j;
    j["callsign"] = c.callsign;
    j["ctype"] = channel_name(c.ctype);
    j["value"] = c.value;
    j["direction"] = direction_name(c.direction);
    j["start_t"] = c.start_t;
    j["duration_s"] = c.duration_s;
    auto flags = nlohmann::ordered_json::array();
    if (c.conditional) flags.push_back("conditional");
    if (c.compound) flags.push_back("compound");
    j["flags"] = flags;
    if (c.flagged())
      j["exclusion_reason"] = c.conditional ? "conditional" : "compound";
    buf += j.dump();
    buf += '\n';
  }
  write_text_file(path, buf);
}

std::vector<ParsedCommand> load_commands_jsonl(const std::filesystem::path& path) {
  std::vector<ParsedCommand> out;
  for (const auto& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line);
    ParsedCommand c;
    c.callsign = j.at("callsign").get<std::string>();
    c.ctype = channel_from_name(j.at("ctype").get<std::string>());
    c.value = j.at("value").get<long long>();
    c.direction = direction_from_name(j.at("direction").get<std::string>());
    c.start_t = j.at("start_t").get<double>();
    c.duration_s = j.at("duration_s").get<double>();
    for (const auto& f : j.at("flags")) {
      if (f.get<std::string>() == "conditional") c.conditional = true;
      if (f.get<std::string>() == "compound") c.compound = true;
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace atcline
