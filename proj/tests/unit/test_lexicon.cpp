#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "csgan/baselines.hpp"
#include "csgan/error.hpp"
#include "csgan/lexicon.hpp"
#include "helpers.hpp"

using namespace csgan;
using testing::C;
using testing::M;
using testing::S;

namespace {

TranslationLexicon small_lexicon() {
  std::istringstream in("a\tapple\nb\tat any time\n# comment\nc\tcat\n");
  return load_lexicon(in).lexicon;
}

PosLexicon small_pos() {
  PosLexicon pos(TagSet({"n", "v"}, {"n"}));
  pos.set("a", "n");
  pos.set("b", "v");
  pos.set("c", "n");
  return pos;
}

}  // namespace

TEST_SUITE("lexicon") {
  TEST_CASE("lexicon file") {
    auto lex = small_lexicon();
    CHECK(lex.size() == 3);
    CHECK(*lex.joined("b") == "at-any-time");
    CHECK_FALSE(lex.joined("zz").has_value());
    std::istringstream dup("a\tx\na\ty\n");
    auto r = load_lexicon(dup);
    CHECK(r.duplicate_warnings == 1);
    std::istringstream notab("a x\n");
    CHECK_THROWS_AS(load_lexicon(notab), ParseError);
    std::stringstream io;
    write_lexicon(io, lex);
    CHECK(load_lexicon(io).lexicon.entries() == lex.entries());
  }

  TEST_CASE("tag set") {
    TagSet t({"n", "v"}, {"n"});
    CHECK(t.id("x").has_value());
    CHECK(t.id("eng").has_value());
    CHECK(t.is_noun("n"));
    CHECK_FALSE(t.is_noun("v"));
    CHECK(t.id_or_default("??") == *t.id("x"));
    std::vector<std::string> many;
    for (int i = 0; i < 70; ++i) many.push_back("t" + std::to_string(i));
    CHECK_THROWS(TagSet(many));
    std::stringstream io;
    write_tagset(io, t);
    auto back = load_tagset(io);
    CHECK(back.tags() == t.tags());
    CHECK(back.noun_tags() == t.noun_tags());
  }

  TEST_CASE("pos lexicon and tagging") {
    auto pos = small_pos();
    CHECK(pos.tag_of("a") == "n");
    CHECK(pos.tag_of("q") == "x");
    std::istringstream unknown_tag("a\tzzz\n");
    CHECK_THROWS(load_pos_lexicon(unknown_tag, pos.tags()));
    auto tagged = tag_pos(pos, S("a|h q|h w|g"));
    CHECK(tagged.tokens[0].pos == std::optional<std::string>("n"));
    CHECK(tagged.tokens[1].pos == std::optional<std::string>("x"));
    CHECK(tagged.tokens[2].pos == std::optional<std::string>("eng"));
  }

  TEST_CASE("realize") {
    auto lex = small_lexicon();
    auto x = S("a|h q|h b|h");
    CHECK(switchable_positions(x, lex) == std::vector<bool>{true, false, true});
    auto y = realize(x, M("101"), lex);
    CHECK(y.surfaces() == std::vector<std::string>{"apple", "q", "at-any-time"});
    CHECK(guest_mask(y) == M("101"));
    CHECK(realize(x, M("000"), lex) == x);
    CHECK_THROWS_AS(realize(x, M("010"), lex), RealizationError);
    CHECK_THROWS(realize(x, M("10"), lex));
  }

  TEST_CASE("realize keeps length and untouched positions for random masks") {
    auto lex = small_lexicon();
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      Sentence x;
      for (std::size_t i = 0, n = 1 + rng() % 8; i < n; ++i)
        x.tokens.push_back({std::string(1, "abcq"[rng() % 4]), Lang::Host, {}, 0});
      auto sw = switchable_positions(x, lex);
      SwitchMask m;
      for (bool ok : sw) m.bits.push_back(ok && rng() % 2);
      auto y = realize(x, m, lex);
      REQUIRE(y.size() == x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK((y.tokens[i].lang == Lang::Guest) == m.bits[i]);
        if (!m.bits[i]) CHECK(y.tokens[i] == x.tokens[i]);
      }
    }
  }

  TEST_CASE("coverage") {
    auto lex = small_lexicon();
    CHECK(coverage(lex, C({"a|h b|h"})) == 1.0);
    CHECK(coverage(TranslationLexicon{}, C({"a|h"})) == 0.0);
    CHECK(coverage(lex, C({"a|h z|h"})) == 0.5);
  }
}

TEST_SUITE("baselines") {
  TEST_CASE("zh, en and noun") {
    auto lex = small_lexicon();
    auto pos = small_pos();
    std::mt19937_64 rng(1);
    auto x = S("a|h b|h q|h c|h");
    CHECK(apply_baseline(BaselineStrategy::parse("zh"), x, lex, &pos, rng).sentence == x);
    auto en = apply_baseline(BaselineStrategy::parse("en"), x, lex, &pos, rng);
    CHECK(en.sentence.surfaces() == std::vector<std::string>{"apple", "at-any-time", "q", "cat"});
    CHECK(en.missing == 1);
    auto noun = apply_baseline(BaselineStrategy::parse("noun"), x, lex, &pos, rng);
    CHECK(noun.mask == M("1001"));
    CHECK_THROWS(apply_baseline(BaselineStrategy::parse("noun"), x, lex, nullptr, rng));
    CHECK_THROWS(BaselineStrategy::parse("bogus"));
    CHECK_THROWS(BaselineStrategy::parse("random", 1.5));
  }

  TEST_CASE("random degenerate probabilities") {
    auto lex = small_lexicon();
    std::mt19937_64 rng(1);
    auto x = S("a|h b|h q|h c|h");
    CHECK(apply_baseline(BaselineStrategy::parse("random", 0.0), x, lex, nullptr, rng).sentence == x);
    CHECK(apply_baseline(BaselineStrategy::parse("random", 1.0), x, lex, nullptr, rng).sentence ==
          apply_baseline(BaselineStrategy::parse("en"), x, lex, nullptr, rng).sentence);
  }

  TEST_CASE("random switch fraction concentrates at p") {
    TranslationLexicon lex;
    lex.set("a", {"x"});
    Sentence x;
    for (int i = 0; i < 1000; ++i) x.tokens.push_back({"a", Lang::Host, {}, 0});
    std::mt19937_64 rng(7);
    std::size_t switched = 0, total = 0;
    for (int k = 0; k < 20; ++k) {
      auto r = apply_baseline(BaselineStrategy::parse("random", 0.2), x, lex, nullptr, rng);
      switched += r.mask.count();
      total += x.size();
    }
    double frac = double(switched) / double(total);
    CHECK(std::abs(frac - 0.2) < 3.0 * std::sqrt(0.2 * 0.8 / double(total)));
  }
}
