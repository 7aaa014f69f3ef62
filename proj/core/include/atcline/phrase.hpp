#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atcline/detect.hpp"

namespace atcline {

enum class Speaker { atco, pilot, unknown };

enum class Direction { none, left, right };

std::string direction_name(Direction d);
Direction direction_from_name(const std::string& s);

struct TranscriptUtterance {
  double start_t = 0.0;
  double duration_s = 0.0;
  Speaker speaker = Speaker::unknown;
  std::string text;  // lowercase word tokens separated by single spaces
};

struct ParsedCommand {
  std::string callsign;  // normalized ICAO form, e.g. BAW123
  Channel ctype = Channel::altitude;
  long long value = 0;  // feet / knots / degrees
  Direction direction = Direction::none;
  double start_t = 0.0;
  double duration_s = 0.0;
  bool conditional = false;
  bool compound = false;

  bool flagged() const { return conditional || compound; }
  double end_t() const { return start_t + duration_s; }
};

// Parsing is total: every utterance maps to exactly one outcome.
enum class ParseStatus { ok, no_callsign, not_a_command, missing_value, wrong_speaker };

std::string parse_status_name(ParseStatus s);

struct ParseResult {
  ParseStatus status = ParseStatus::not_a_command;
  ParsedCommand cmd;  // populated iff status == ok
};

// Spoken-alias to ICAO airline code map ("speedbird" -> BAW). Aliases may be
// multi-word; lookup takes the longest matching token prefix.
class CallsignTable {
 public:
  static CallsignTable builtin();
  static CallsignTable from_csv(const std::filesystem::path& path);

  void add(const std::string& alias, const std::string& icao);

  // Longest alias matching a prefix of tokens[start..]; returns the ICAO code
  // and the number of tokens consumed.
  std::optional<std::pair<std::string, int>> match_alias(
      const std::vector<std::string>& tokens, std::size_t start) const;

  // First alias registered for a code, for rendering canonical phraseology.
  std::optional<std::string> alias_for(const std::string& icao) const;

  // All (spoken alias, ICAO code) rows in registration order.
  std::vector<std::pair<std::string, std::string>> entries() const;

  std::size_t size() const { return aliases_.size(); }

 private:
  std::vector<std::pair<std::vector<std::string>, std::string>> aliases_;
  std::map<std::string, std::string> first_alias_;  // icao -> spoken alias
};

// Keyword groups, number words, and exclusion triggers. Editable as a JSON
// data file; the builtin set matches core/data/phraseology.json.
struct PhraseRules {
  std::vector<std::string> altitude_keywords;
  std::vector<std::string> speed_keywords;
  std::vector<std::string> heading_keywords;
  std::vector<std::string> conditional_tokens;
  std::map<std::string, int> digit_words;
  std::map<std::string, char> phonetic_letters;
  bool maintain_is_altitude = true;

  static PhraseRules builtin();
  static PhraseRules from_json(const std::filesystem::path& path);
};

struct CallsignMatch {
  std::string icao;
  std::vector<std::string> tail;  // unconsumed tokens
};

std::vector<std::string> tokenize(const std::string& text);

// Longest-prefix alias match plus spoken digits/phonetic suffix letters.
// Throws NoCallsign when neither an alias nor a literal code+digits token
// starts the stream.
CallsignMatch parse_callsign(const std::vector<std::string>& tokens,
                             const CallsignTable& table,
                             const PhraseRules& rules);

ParseResult parse_utterance(const TranscriptUtterance& u, const CallsignTable& table,
                            const PhraseRules& rules);

struct FilterResult {
  std::vector<ParsedCommand> kept;
  std::vector<ParsedCommand> excluded;
};

// Moves conditional/compound commands to the excluded list, preserving order.
FilterResult filter_commands(const std::vector<ParsedCommand>& cmds);

// Canonical spoken form that re-parses to an identical command.
std::string render_command(const ParsedCommand& cmd, const CallsignTable& table);

// Spoken digit rendering helpers used by the canonical renderer and synthgen.
std::string spell_digits(long long value);
std::string spell_quantity(long long value);  // uses thousand/hundred forms

std::vector<TranscriptUtterance> load_transcript_tsv(const std::filesystem::path& path);
void save_transcript_tsv(const std::filesystem::path& path,
                         const std::vector<TranscriptUtterance>& utterances);

void save_commands_jsonl(const std::filesystem::path& path,
                         const std::vector<ParsedCommand>& cmds);
std::vector<ParsedCommand> load_commands_jsonl(const std::filesystem::path& path);

}  // namespace atcline
