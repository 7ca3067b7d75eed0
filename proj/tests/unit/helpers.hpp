#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csgan/corpus.hpp"
#include "csgan/lexicon.hpp"

namespace testing {

// Shorthand: tokens written as "word|h" / "word|g" so tests need no CJK text.
inline csgan::Sentence S(const std::string& line) { return csgan::parse_sentence(line); }

inline csgan::Corpus C(const std::vector<std::string>& lines) {
  csgan::Corpus c;
  for (const auto& l : lines) c.sentences.push_back(S(l));
  return c;
}

inline csgan::SwitchMask M(const std::string& bits) {
  csgan::SwitchMask m;
  for (char b : bits) m.bits.push_back(b == '1');
  return m;
}

// Host sentence over symbols 0..alphabet-1 rendered as "w<k>|h".
inline csgan::Sentence random_host(std::mt19937_64& rng, std::size_t len, int alphabet) {
  csgan::Sentence s;
  std::uniform_int_distribution<int> d(0, alphabet - 1);
  for (std::size_t i = 0; i < len; ++i) s.tokens.push_back({"w" + std::to_string(d(rng)), csgan::Lang::Host, {}, 0});
  return s;
}

}  // namespace testing

#include <algorithm>
#include <cmath>
#include <functional>

#include "csgan/neural.hpp"

namespace testing {

// Independent five-point central-difference check over every coordinate of
// the parameters whose names start with one of `prefixes` (all when empty).
inline double max_fd_error(csgan::nn::ParamBlock& params, const std::function<double()>& loss,
                           const csgan::nn::GradBlock& analytic, const std::vector<std::string>& prefixes = {},
                           std::string* worst = nullptr) {
  const double h = 1e-3;
  double max_err = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    if (!prefixes.empty() &&
        std::none_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) { return name.rfind(p, 0) == 0; }))
      continue;
    auto& v = params.value(i);
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      double saved = v.data()[k];
      auto at = [&](double d) {
        v.data()[k] = saved + d;
        return loss();
      };
      double numeric = (at(-2 * h) - 8 * at(-h) + 8 * at(h) - at(2 * h)) / (12 * h);
      v.data()[k] = saved;
      double a = analytic[i].data()[k];
      double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (err > max_err) {
        max_err = err;
        if (worst) *worst = name;
      }
    }
  }
  return max_err;
}

}  // namespace testing
