#include "csgan/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "csgan/error.hpp"

namespace csgan {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

}  // namespace

void TranslationLexicon::set(std::string host, std::vector<std::string> guest) {
  if (host.empty()) throw DomainError("lexicon key must be non-empty");
  if (guest.empty()) throw DomainError("translation for '" + host + "' is empty");
  entries_[std::move(host)] = std::move(guest);
}

const std::vector<std::string>* TranslationLexicon::find(std::string_view host) const {
  auto it = entries_.find(host);
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<std::string> TranslationLexicon::joined(std::string_view host) const {
  const auto* words = find(host);
  if (!words) return std::nullopt;
  std::string out;
  for (std::size_t i = 0; i < words->size(); ++i) {
    if (i) out += '-';
    out += (*words)[i];
  }
  return out;
}

LexiconLoad load_lexicon(std::istream& in) {
  LexiconLoad result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("lexicon record without tab separator", lineno);
    std::string host = trim(line.substr(0, tab));
    auto guest = split_words(line.substr(tab + 1));
    if (host.empty()) throw ParseError("lexicon record with empty host surface", lineno);
    if (guest.empty()) throw ParseError("lexicon record with empty translation", lineno);
    if (result.lexicon.contains(host)) ++result.duplicate_warnings;
    result.lexicon.set(std::move(host), std::move(guest));
  }
  return result;
}

LexiconLoad load_lexicon_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon file " + path);
  return load_lexicon(in);
}

void write_lexicon(std::ostream& out, const TranslationLexicon& lex) {
  for (const auto& [host, guest] : lex.entries()) {
    out << host << '\t';
    for (std::size_t i = 0; i < guest.size(); ++i) out << (i ? " " : "") << guest[i];
    out << '\n';
  }
}

TagSet::TagSet() : TagSet(std::vector<std::string>{}) {}

TagSet::TagSet(const std::vector<std::string>& tags, const std::vector<std::string>& noun_tags) {
  add(kDefaultTag, false);
  add(kGuestTag, false);
  for (const auto& t : tags)
    add(t, std::find(noun_tags.begin(), noun_tags.end(), t) != noun_tags.end());
  for (const auto& t : noun_tags) add(t, true);
}

void TagSet::add(const std::string& tag, bool noun) {
  if (tag.empty()) throw DomainError("empty POS tag");
  auto it = std::find(tags_.begin(), tags_.end(), tag);
  if (it != tags_.end()) {
    if (noun) noun_[static_cast<std::size_t>(it - tags_.begin())] = true;
    return;
  }
  if (tags_.size() >= kMaxTags) throw DomainError("POS inventory exceeds 64 tags");
  tags_.push_back(tag);
  noun_.push_back(noun);
}

std::optional<std::int32_t> TagSet::id(std::string_view tag) const {
  auto it = std::find(tags_.begin(), tags_.end(), tag);
  if (it == tags_.end()) return std::nullopt;
  return static_cast<std::int32_t>(it - tags_.begin());
}

std::int32_t TagSet::id_or_default(std::string_view tag) const { return id(tag).value_or(0); }

bool TagSet::is_noun(std::string_view tag) const {
  auto i = id(tag);
  return i && noun_[static_cast<std::size_t>(*i)];
}

std::vector<std::string> TagSet::noun_tags() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tags_.size(); ++i)
    if (noun_[i]) out.push_back(tags_[i]);
  return out;
}

TagSet load_tagset(std::istream& in) {
  std::vector<std::string> tags;
  std::vector<std::string> nouns;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.rfind("noun:", 0) == 0) {
      t = trim(t.substr(5));
      if (t.empty()) throw ParseError("empty noun tag", lineno);
      nouns.push_back(t);
    }
    tags.push_back(t);
  }
  try {
    return TagSet(tags, nouns);
  } catch (const DomainError& e) {
    throw ParseError(e.what(), lineno);
  }
}

TagSet load_tagset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open tag inventory " + path);
  return load_tagset(in);
}

void write_tagset(std::ostream& out, const TagSet& tags) {
  for (const auto& t : tags.tags()) out << (tags.is_noun(t) ? "noun:" : "") << t << '\n';
}

void PosLexicon::set(std::string host, const std::string& tag) {
  if (!tags_.id(tag)) throw DomainError("POS tag '" + tag + "' is not in the tag inventory");
  entries_[std::move(host)] = tag;
}

const std::string& PosLexicon::tag_of(std::string_view host) const {
  auto it = entries_.find(host);
  return it == entries_.end() ? tags_.name(0) : it->second;
}

PosLexicon load_pos_lexicon(std::istream& in, TagSet tags) {
  PosLexicon lex(std::move(tags));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("POS record without tab separator", lineno);
    std::string host = trim(line.substr(0, tab));
    std::string tag = trim(line.substr(tab + 1));
    if (host.empty() || tag.empty()) throw ParseError("incomplete POS record", lineno);
    try {
      lex.set(std::move(host), tag);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  return lex;
}

PosLexicon load_pos_lexicon_file(const std::string& path, TagSet tags) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open POS lexicon " + path);
  return load_pos_lexicon(in, std::move(tags));
}

void write_pos_lexicon(std::ostream& out, const PosLexicon& pos) {
  for (const auto& [host, tag] : pos.entries()) out << host << '\t' << tag << '\n';
}

Sentence tag_pos(const PosLexicon& lex, const Sentence& s) {
  Sentence out = s;
  for (auto& t : out.tokens) t.pos = t.lang == Lang::Guest ? std::string(TagSet::kGuestTag) : lex.tag_of(t.surface);
  return out;
}

Corpus tag_pos(const PosLexicon& lex, const Corpus& c) {
  Corpus out;
  out.role = c.role;
  out.sentences.reserve(c.size());
  for (const auto& s : c.sentences) out.sentences.push_back(tag_pos(lex, s));
  return out;
}

std::size_t SwitchMask::count() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true)); }

std::vector<bool> switchable_positions(const Sentence& x, const TranslationLexicon& lex) {
  std::vector<bool> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = x.tokens[i].lang == Lang::Host && lex.contains(x.tokens[i].surface);
  return out;
}

Sentence realize(const Sentence& x, const SwitchMask& mask, const TranslationLexicon& lex) {
  if (mask.size() != x.size())
    throw RealizationError("mask length " + std::to_string(mask.size()) + " does not match sentence length " +
                           std::to_string(x.size()));
  Sentence out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!mask.bits[i]) continue;
    auto translation = lex.joined(x.tokens[i].surface);
    if (!translation)
      throw RealizationError("no translation for '" + x.tokens[i].surface + "' at position " + std::to_string(i));
    auto& t = out.tokens[i];
    t.surface = std::move(*translation);
    t.lang = Lang::Guest;
    if (t.pos) t.pos = std::string(TagSet::kGuestTag);
  }
  return out;
}

SwitchMask guest_mask(const Sentence& y) {
  SwitchMask m;
  m.bits.reserve(y.size());
  for (const auto& t : y.tokens) m.bits.push_back(t.lang == Lang::Guest);
  return m;
}

double coverage(const TranslationLexicon& lex, const Corpus& c) {
  std::size_t host = 0;
  std::size_t covered = 0;
  for (const auto& s : c.sentences)
    for (const auto& t : s.tokens) {
      if (t.lang != Lang::Host) continue;
      ++host;
      if (lex.contains(t.surface)) ++covered;
    }
  return host == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(host);
}

}  // namespace csgan
