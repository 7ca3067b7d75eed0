#include "csgan/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>

#include "csgan/error.hpp"

namespace csgan {

namespace {

const std::vector<ScriptRange> kCjkRanges = {
    {0x4E00, 0x9FFF}, {0x3400, 0x4DBF}, {0xF900, 0xFAFF}, {0x20000, 0x2A6DF}};

const std::vector<ScriptRange> kLatinRanges = {
    {U'A', U'Z'}, {U'a', U'z'}, {0xC0, 0xD6}, {0xD8, 0xF6}, {0xF8, 0x24F},
    {0xFF21, 0xFF3A}, {0xFF41, 0xFF5A}};

bool in_ranges(char32_t cp, const std::vector<ScriptRange>& ranges) {
  return std::any_of(ranges.begin(), ranges.end(),
                     [cp](const ScriptRange& r) { return cp >= r.lo && cp <= r.hi; });
}

// Punctuation, digits, symbols and combining marks; everything else counts as a letter.
bool is_letter(char32_t cp) {
  if (cp < 0x80) return (cp >= U'A' && cp <= U'Z') || (cp >= U'a' && cp <= U'z');
  if (cp <= 0xBF) return false;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x300 && cp <= 0x36F) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF20) return false;
  if (cp >= 0xFF3B && cp <= 0xFF40) return false;
  if (cp >= 0xFF5B && cp <= 0xFF65) return false;
  return true;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

struct RawToken {
  std::string_view text;
  std::size_t column;
};

std::vector<RawToken> split_tokens(std::string_view line) {
  std::vector<RawToken> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

}  // namespace

const char* lang_name(Lang lang) { return lang == Lang::Host ? "host" : "guest"; }

bool Sentence::is_host_monolingual() const {
  return std::all_of(tokens.begin(), tokens.end(), [](const Token& t) { return t.lang == Lang::Host; });
}

std::size_t Sentence::guest_count() const {
  return static_cast<std::size_t>(
      std::count_if(tokens.begin(), tokens.end(), [](const Token& t) { return t.lang == Lang::Guest; }));
}

std::vector<std::string> Sentence::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

std::vector<char32_t> utf8_decode(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    auto b = static_cast<unsigned char>(text[i]);
    char32_t cp;
    std::size_t len;
    if (b < 0x80) {
      cp = b;
      len = 1;
    } else if ((b >> 5) == 0x6) {
      cp = b & 0x1F;
      len = 2;
    } else if ((b >> 4) == 0xE) {
      cp = b & 0x0F;
      len = 3;
    } else if ((b >> 3) == 0x1E) {
      cp = b & 0x07;
      len = 4;
    } else {
      throw DomainError("invalid UTF-8 lead byte");
    }
    if (i + len > text.size()) throw DomainError("truncated UTF-8 sequence");
    for (std::size_t k = 1; k < len; ++k) {
      auto c = static_cast<unsigned char>(text[i + k]);
      if ((c >> 6) != 0x2) throw DomainError("invalid UTF-8 continuation byte");
      cp = (cp << 6) | (c & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

std::optional<Lang> try_infer_language(std::string_view surface, const FormatConfig& format) {
  const auto& host = format.host_ranges.empty() ? kCjkRanges : format.host_ranges;
  const auto& guest = format.guest_ranges.empty() ? kLatinRanges : format.guest_ranges;
  for (char32_t cp : utf8_decode(surface)) {
    if (in_ranges(cp, host)) return Lang::Host;
    if (in_ranges(cp, guest)) return Lang::Guest;
    if (is_letter(cp)) return std::nullopt;
  }
  return std::nullopt;
}

Lang infer_language(std::string_view surface, const FormatConfig& format) {
  if (surface.empty()) throw DomainError("cannot classify an empty surface");
  auto lang = try_infer_language(surface, format);
  if (!lang) throw DomainError("unclassifiable token '" + std::string(surface) + "'");
  return *lang;
}

namespace {

// Returns nullopt when the token should be dropped.
std::optional<Token> parse_token(const RawToken& raw, const FormatConfig& format, std::size_t line) {
  Token tok;
  tok.column = raw.column;
  std::string_view text = raw.text;
  auto bar = text.find('|');
  bool tagged = format.mode != TagMode::Infer && bar != std::string_view::npos;
  if (format.mode == TagMode::Explicit && !tagged)
    throw ParseError("token '" + std::string(text) + "' lacks a |h or |g suffix", line);
  if (tagged) {
    std::string_view surface = text.substr(0, bar);
    std::string_view rest = text.substr(bar + 1);
    std::string_view tag = rest;
    std::string_view pos;
    auto bar2 = rest.find('|');
    if (bar2 != std::string_view::npos) {
      tag = rest.substr(0, bar2);
      pos = rest.substr(bar2 + 1);
      if (pos.empty() || pos.find('|') != std::string_view::npos)
        throw ParseError("malformed POS suffix in '" + std::string(text) + "'", line);
    }
    if (surface.empty()) throw ParseError("empty surface in '" + std::string(text) + "'", line);
    if (tag == "h") {
      tok.lang = Lang::Host;
    } else if (tag == "g") {
      tok.lang = Lang::Guest;
    } else {
      throw ParseError("malformed tag suffix in '" + std::string(text) + "'", line);
    }
    tok.surface = std::string(surface);
    if (!pos.empty()) tok.pos = std::string(pos);
    return tok;
  }
  auto lang = try_infer_language(text, format);
  if (!lang) {
    if (format.on_unclassifiable == UnclassifiablePolicy::DropToken) return std::nullopt;
    throw ParseError("unclassifiable token '" + std::string(text) + "'", line);
  }
  tok.surface = std::string(text);
  tok.lang = *lang;
  return tok;
}

}  // namespace

Sentence parse_sentence(std::string_view line, const FormatConfig& format) {
  Sentence s;
  for (const auto& raw : split_tokens(line)) {
    if (auto tok = parse_token(raw, format, 0)) s.tokens.push_back(std::move(*tok));
  }
  return s;
}

ParseResult parse_corpus(std::istream& in, const FormatConfig& format, CorpusRole role) {
  ParseResult result;
  result.corpus.role = role;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line[0] == '#') {
      ++result.skipped_lines;
      continue;
    }
    auto raws = split_tokens(line);
    if (raws.empty()) {
      ++result.skipped_lines;
      continue;
    }
    Sentence s;
    s.source_line = lineno;
    for (const auto& raw : raws) {
      auto tok = parse_token(raw, format, lineno);
      if (!tok) {
        ++result.dropped_tokens;
        continue;
      }
      if (role == CorpusRole::HostMonolingual && tok->lang == Lang::Guest)
        throw ParseError("guest token '" + tok->surface + "' in host-monolingual corpus", lineno);
      s.tokens.push_back(std::move(*tok));
    }
    if (s.tokens.empty()) {
      ++result.skipped_lines;
      continue;
    }
    result.corpus.sentences.push_back(std::move(s));
  }
  if (result.corpus.sentences.empty()) throw ParseError("corpus contains no usable sentences", 0);
  return result;
}

ParseResult parse_corpus_file(const std::string& path, const FormatConfig& format, CorpusRole role) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file " + path);
  try {
    return parse_corpus(in, format, role);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const auto& t = s.tokens[i];
      if (i) out << ' ';
      out << t.surface << (t.lang == Lang::Host ? "|h" : "|g");
      if (t.pos) out << '|' << *t.pos;
    }
    out << '\n';
  }
}

void write_corpus_file(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_corpus(out, corpus);
}

void write_plain(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.sentences) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) out << (i ? " " : "") << s.tokens[i].surface;
    out << '\n';
  }
}

double cs_rate(const Corpus& corpus) {
  std::size_t guest = 0;
  std::size_t total = 0;
  for (const auto& s : corpus.sentences) {
    std::size_t g = s.guest_count();
    if (g == 0) continue;
    guest += g;
    total += s.size();
  }
  if (total == 0) throw DomainError("cs-rate undefined: corpus has no code-switched utterance");
  return static_cast<double>(guest) / static_cast<double>(total);
}

StatsReport corpus_stats(const Corpus& corpus) {
  StatsReport r;
  for (const auto& s : corpus.sentences) {
    std::size_t g = s.guest_count();
    ++r.total_utterances;
    r.total_words += s.size();
    r.guest_words += g;
    r.host_words += s.size() - g;
    if (g == 0) {
      ++r.host_utterances;
    } else if (g == s.size()) {
      ++r.guest_utterances;
      ++r.cs_utterances;
    } else {
      ++r.cs_utterances;
    }
  }
  if (r.cs_utterances > 0) r.cs_rate = cs_rate(corpus);
  return r;
}

void write_stats_text(std::ostream& out, const StatsReport& r) {
  out << "total_utterances " << r.total_utterances << '\n'
      << "host_utterances " << r.host_utterances << '\n'
      << "cs_utterances " << r.cs_utterances << '\n'
      << "total_words " << r.total_words << '\n'
      << "host_words " << r.host_words << '\n'
      << "guest_words " << r.guest_words << '\n';
  if (r.cs_rate) {
    out << "cs_rate " << std::setprecision(6) << *r.cs_rate << '\n';
  } else {
    out << "cs_rate undefined\n";
  }
}

void write_stats_csv(std::ostream& out, const std::vector<std::pair<std::string, StatsReport>>& columns) {
  out << "row";
  for (const auto& [name, _] : columns) out << ',' << name;
  out << '\n';
  auto row = [&](const char* label, auto get) {
    out << label;
    for (const auto& col : columns) out << ',' << get(col.second);
    out << '\n';
  };
  row("# total utterances", [](const StatsReport& r) { return std::to_string(r.total_utterances); });
  row("# host utterances", [](const StatsReport& r) { return std::to_string(r.host_utterances); });
  row("# code-switching utterances", [](const StatsReport& r) { return std::to_string(r.cs_utterances); });
  row("# total words", [](const StatsReport& r) { return std::to_string(r.total_words); });
  row("# host words", [](const StatsReport& r) { return std::to_string(r.host_words); });
  row("# guest words", [](const StatsReport& r) { return std::to_string(r.guest_words); });
  row("cs-rate", [](const StatsReport& r) {
    if (!r.cs_rate) return std::string("undefined");
    std::ostringstream os;
    os << std::setprecision(6) << *r.cs_rate;
    return os.str();
  });
}

CleanResult clean(const Corpus& corpus, const CleaningConfig& config) {
  std::vector<std::regex> patterns;
  patterns.reserve(config.patterns.size());
  for (const auto& p : config.patterns) patterns.emplace_back(p, std::regex::ECMAScript);
  auto removable = [&](const Token& t) {
    if (std::find(config.markers.begin(), config.markers.end(), t.surface) != config.markers.end()) return true;
    return std::any_of(patterns.begin(), patterns.end(),
                       [&](const std::regex& re) { return std::regex_match(t.surface, re); });
  };

  CleanResult result;
  result.corpus.role = corpus.role;
  for (const auto& s : corpus.sentences) {
    Sentence kept;
    kept.source_line = s.source_line;
    std::size_t removed = 0;
    for (const auto& t : s.tokens) {
      if (removable(t)) {
        ++removed;
      } else {
        kept.tokens.push_back(t);
      }
    }
    double frac = static_cast<double>(removed) / static_cast<double>(s.size());
    if (kept.tokens.empty() || frac > config.drop_threshold) {
      ++result.dropped_utterances;
      continue;
    }
    result.removed_tokens += removed;
    result.corpus.sentences.push_back(std::move(kept));
  }
  return result;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> surfaces) {
  surfaces_ = {"<unk>", "<s>", "</s>"};
  for (auto& s : surfaces) {
    if (index_.count(s) || s == "<unk>" || s == "<s>" || s == "</s>") continue;
    surfaces_.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < surfaces_.size(); ++i) index_.emplace(surfaces_[i], static_cast<std::int32_t>(i));
}

std::int32_t Vocabulary::id(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::surface(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= surfaces_.size())
    throw DomainError("vocabulary id " + std::to_string(id) + " out of range");
  return surfaces_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view surface) const { return index_.count(std::string(surface)) > 0; }

std::vector<std::int32_t> Vocabulary::encode(const Sentence& s) const {
  std::vector<std::int32_t> ids;
  ids.reserve(s.size());
  for (const auto& t : s.tokens) ids.push_back(id(t.surface));
  return ids;
}

Vocabulary build_vocab(const std::vector<const Corpus*>& corpora, std::size_t max_size,
                       const std::vector<std::string>& extra) {
  if (max_size < Vocabulary::kReserved) throw DomainError("vocabulary max_size must be at least 3");
  std::map<std::string, std::size_t> counts;
  for (const Corpus* c : corpora)
    for (const auto& s : c->sentences)
      for (const auto& t : s.tokens) ++counts[t.surface];
  for (const auto& e : extra) ++counts[e];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // std::map iteration is lexicographic, so a stable sort keeps that order among ties.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> keep;
  for (auto& [surface, _] : ranked) {
    if (surface == "<unk>" || surface == "<s>" || surface == "</s>") continue;
    if (keep.size() + Vocabulary::kReserved >= max_size) break;
    keep.push_back(surface);
  }
  return Vocabulary(std::move(keep));
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t max_size) { return build_vocab({&corpus}, max_size); }

}  // namespace csgan
