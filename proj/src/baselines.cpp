#include "csgan/baselines.hpp"

#include "csgan/error.hpp"

namespace csgan {

BaselineStrategy BaselineStrategy::parse(const std::string& name, double p) {
  BaselineStrategy s;
  s.p = p;
  if (name == "zh") {
    s.kind = BaselineKind::ZH;
  } else if (name == "en") {
    s.kind = BaselineKind::EN;
  } else if (name == "random") {
    s.kind = BaselineKind::Random;
  } else if (name == "noun") {
    s.kind = BaselineKind::Noun;
  } else {
    throw ConfigError("unknown baseline '" + name + "' (expected zh, en, random or noun)");
  }
  if (s.kind == BaselineKind::Random && (p < 0.0 || p > 1.0)) throw ConfigError("random baseline p must lie in [0, 1]");
  return s;
}

std::string BaselineStrategy::name() const {
  switch (kind) {
    case BaselineKind::ZH:
      return "zh";
    case BaselineKind::EN:
      return "en";
    case BaselineKind::Random:
      return "random";
    case BaselineKind::Noun:
      return "noun";
  }
  return "?";
}

BaselineResult apply_baseline(const BaselineStrategy& strategy, const Sentence& x, const TranslationLexicon& lex,
                              const PosLexicon* pos, std::mt19937_64& rng) {
  if (strategy.kind == BaselineKind::Noun && !pos) throw ConfigError("noun baseline requires a POS lexicon");
  if (strategy.kind == BaselineKind::Random && (strategy.p < 0.0 || strategy.p > 1.0))
    throw ConfigError("random baseline p must lie in [0, 1]");
  BaselineResult out;
  out.mask.bits.assign(x.size(), false);
  auto switchable = switchable_positions(x, lex);
  std::bernoulli_distribution coin(strategy.kind == BaselineKind::Random ? strategy.p : 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const Token& t = x.tokens[n];
    if (t.lang != Lang::Host) continue;
    bool want = false;
    switch (strategy.kind) {
      case BaselineKind::ZH:
        break;
      case BaselineKind::EN:
        want = true;
        break;
      case BaselineKind::Random:
        want = switchable[n] && coin(rng);
        break;
      case BaselineKind::Noun:
        want = pos->tags().is_noun(t.pos ? *t.pos : pos->tag_of(t.surface));
        break;
    }
    if (!want) continue;
    if (switchable[n]) {
      out.mask.bits[n] = true;
    } else {
      ++out.missing;
    }
  }
  out.sentence = realize(x, out.mask, lex);
  return out;
}

}  // namespace csgan
