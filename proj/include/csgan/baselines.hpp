#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "csgan/corpus.hpp"
#include "csgan/lexicon.hpp"

namespace csgan {

enum class BaselineKind : std::uint8_t { ZH, EN, Random, Noun };

struct BaselineStrategy {
  BaselineKind kind = BaselineKind::ZH;
  double p = 0.0;  // Random only

  static BaselineStrategy parse(const std::string& name, double p = 0.0);
  std::string name() const;
};

struct BaselineResult {
  Sentence sentence;
  SwitchMask mask;
  std::size_t missing = 0;  // tokens the strategy wanted to switch but had no translation for
};

/// ZH keeps x, EN translates every covered token, Random switches each covered
/// token with probability p, Noun translates covered noun-tagged tokens.
BaselineResult apply_baseline(const BaselineStrategy& strategy, const Sentence& x, const TranslationLexicon& lex,
                              const PosLexicon* pos, std::mt19937_64& rng);

}  // namespace csgan
