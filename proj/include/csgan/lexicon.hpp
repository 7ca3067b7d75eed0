#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csgan/corpus.hpp"

namespace csgan {

/// Host surface -> guest translation (one or more guest words).
class TranslationLexicon {
 public:
  void set(std::string host, std::vector<std::string> guest);
  const std::vector<std::string>* find(std::string_view host) const;
  bool contains(std::string_view host) const { return find(host) != nullptr; }
  /// The translation joined with '-', i.e. the single token a switch produces.
  std::optional<std::string> joined(std::string_view host) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, std::vector<std::string>, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

struct LexiconLoad {
  TranslationLexicon lexicon;
  std::size_t duplicate_warnings = 0;
};

LexiconLoad load_lexicon(std::istream& in);
LexiconLoad load_lexicon_file(const std::string& path);
void write_lexicon(std::ostream& out, const TranslationLexicon& lex);

/// Closed POS inventory of at most 64 tags. "x" (unknown host word) and "eng"
/// (any guest word) are always present.
class TagSet {
 public:
  static constexpr std::size_t kMaxTags = 64;
  static constexpr const char* kDefaultTag = "x";
  static constexpr const char* kGuestTag = "eng";

  TagSet();
  explicit TagSet(const std::vector<std::string>& tags, const std::vector<std::string>& noun_tags = {});

  std::size_t size() const { return tags_.size(); }
  std::optional<std::int32_t> id(std::string_view tag) const;
  /// Unknown tags map to the default tag.
  std::int32_t id_or_default(std::string_view tag) const;
  const std::string& name(std::int32_t id) const { return tags_.at(static_cast<std::size_t>(id)); }
  bool is_noun(std::string_view tag) const;
  const std::vector<std::string>& tags() const { return tags_; }
  std::vector<std::string> noun_tags() const;

 private:
  void add(const std::string& tag, bool noun);
  std::vector<std::string> tags_;
  std::vector<bool> noun_;
};

/// One tag per line, `noun:` prefix marks noun tags.
TagSet load_tagset(std::istream& in);
TagSet load_tagset_file(const std::string& path);
void write_tagset(std::ostream& out, const TagSet& tags);

class PosLexicon {
 public:
  PosLexicon() = default;
  explicit PosLexicon(TagSet tags) : tags_(std::move(tags)) {}

  void set(std::string host, const std::string& tag);
  /// Tag name for a host surface, the default tag when absent.
  const std::string& tag_of(std::string_view host) const;
  bool contains(std::string_view host) const { return entries_.find(host) != entries_.end(); }
  const TagSet& tags() const { return tags_; }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  TagSet tags_;
  std::map<std::string, std::string, std::less<>> entries_;
};

/// Tab-separated `surface<TAB>tag`. Tags missing from the inventory are rejected.
PosLexicon load_pos_lexicon(std::istream& in, TagSet tags);
PosLexicon load_pos_lexicon_file(const std::string& path, TagSet tags);
void write_pos_lexicon(std::ostream& out, const PosLexicon& pos);

/// Host tokens get their lexicon tag (or "x"), guest tokens get "eng".
Sentence tag_pos(const PosLexicon& lex, const Sentence& s);
Corpus tag_pos(const PosLexicon& lex, const Corpus& c);

struct SwitchMask {
  std::vector<bool> bits;

  std::size_t size() const { return bits.size(); }
  std::size_t count() const;
  bool operator==(const SwitchMask&) const = default;
};

/// Positions whose token has a translation entry.
std::vector<bool> switchable_positions(const Sentence& x, const TranslationLexicon& lex);

/// Replaces every token with a set bit by its hyphen-joined translation.
/// Throws RealizationError when a set bit has no entry.
Sentence realize(const Sentence& x, const SwitchMask& mask, const TranslationLexicon& lex);

/// Mask of guest positions in an aligned sentence.
SwitchMask guest_mask(const Sentence& y);

/// Fraction of host token occurrences with a lexicon entry (0 for a corpus without host tokens).
double coverage(const TranslationLexicon& lex, const Corpus& c);

}  // namespace csgan
