#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace csgan {

enum class Lang : std::uint8_t { Host, Guest };

const char* lang_name(Lang lang);

struct Token {
  std::string surface;
  Lang lang = Lang::Host;
  std::optional<std::string> pos;
  std::size_t column = 0;  // 1-based byte column in the source line, 0 if synthesized

  // Positions are diagnostics only and do not take part in equality.
  bool operator==(const Token& o) const {
    return surface == o.surface && lang == o.lang && pos == o.pos;
  }
};

struct Sentence {
  std::vector<Token> tokens;
  std::size_t source_line = 0;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  bool is_host_monolingual() const;
  std::size_t guest_count() const;
  std::vector<std::string> surfaces() const;

  bool operator==(const Sentence& o) const { return tokens == o.tokens; }
};

enum class CorpusRole : std::uint8_t { CsTraining, HostMonolingual, Dev, Test };

struct Corpus {
  std::vector<Sentence> sentences;
  CorpusRole role = CorpusRole::CsTraining;

  std::size_t size() const { return sentences.size(); }
  bool operator==(const Corpus& o) const { return sentences == o.sentences; }
};

/// Inclusive code point range.
struct ScriptRange {
  char32_t lo;
  char32_t hi;
};

enum class TagMode : std::uint8_t {
  Infer,     // language from script only; '|' has no special meaning
  Explicit,  // every token must carry |h or |g
  Auto,      // suffix when present, script otherwise
};

enum class UnclassifiablePolicy : std::uint8_t { Fail, DropToken };

struct FormatConfig {
  TagMode mode = TagMode::Auto;
  std::vector<ScriptRange> host_ranges;   // empty -> CJK unified ideographs
  std::vector<ScriptRange> guest_ranges;  // empty -> Latin letters
  UnclassifiablePolicy on_unclassifiable = UnclassifiablePolicy::Fail;
};

struct ParseResult {
  Corpus corpus;
  std::size_t dropped_tokens = 0;
  std::size_t skipped_lines = 0;
};

std::vector<char32_t> utf8_decode(std::string_view text);
std::string utf8_encode(char32_t cp);

/// Classifies a surface form by its first letter-category code point.
/// Throws DomainError when no code point falls in either configured range.
Lang infer_language(std::string_view surface, const FormatConfig& format = {});
std::optional<Lang> try_infer_language(std::string_view surface, const FormatConfig& format = {});

ParseResult parse_corpus(std::istream& in, const FormatConfig& format = {},
                         CorpusRole role = CorpusRole::CsTraining);
ParseResult parse_corpus_file(const std::string& path, const FormatConfig& format = {},
                              CorpusRole role = CorpusRole::CsTraining);
Sentence parse_sentence(std::string_view line, const FormatConfig& format = {});

/// Writes the explicit-tag format (`surface|h`, `surface|g|pos`); parses back to an equal corpus.
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus_file(const std::string& path, const Corpus& corpus);
/// Plain surface text, one utterance per line.
void write_plain(std::ostream& out, const Corpus& corpus);

/// Fraction of guest words among all words of utterances that contain a guest word.
/// Throws DomainError when the corpus has no code-switched utterance.
double cs_rate(const Corpus& corpus);

struct StatsReport {
  std::size_t total_utterances = 0;
  std::size_t host_utterances = 0;
  std::size_t cs_utterances = 0;
  std::size_t guest_utterances = 0;  // utterances made only of guest words
  std::size_t total_words = 0;
  std::size_t host_words = 0;
  std::size_t guest_words = 0;
  std::optional<double> cs_rate;
};

StatsReport corpus_stats(const Corpus& corpus);
void write_stats_text(std::ostream& out, const StatsReport& report);
void write_stats_csv(std::ostream& out, const std::vector<std::pair<std::string, StatsReport>>& columns);

struct CleaningConfig {
  std::vector<std::string> markers;   // exact surfaces, e.g. "<noise>"
  std::vector<std::string> patterns;  // ECMAScript regexes matched against the whole surface
  double drop_threshold = 0.3;        // drop the utterance when removed/total exceeds this
};

struct CleanResult {
  Corpus corpus;
  std::size_t removed_tokens = 0;
  std::size_t dropped_utterances = 0;
};

CleanResult clean(const Corpus& corpus, const CleaningConfig& config);

class Vocabulary {
 public:
  static constexpr std::int32_t kUnk = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr std::size_t kReserved = 3;

  Vocabulary();
  explicit Vocabulary(std::vector<std::string> surfaces);  // reserved entries first

  std::int32_t id(std::string_view surface) const;
  const std::string& surface(std::int32_t id) const;
  std::size_t size() const { return surfaces_.size(); }
  bool contains(std::string_view surface) const;
  const std::vector<std::string>& surfaces() const { return surfaces_; }
  std::vector<std::int32_t> encode(const Sentence& s) const;

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, std::int32_t> index_;
};

/// Keeps the most frequent surfaces, ties broken lexicographically; max_size includes
/// the three reserved entries.
Vocabulary build_vocab(const std::vector<const Corpus*>& corpora, std::size_t max_size,
                       const std::vector<std::string>& extra = {});
Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size);

}  // namespace csgan
