#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "csgan/baselines.hpp"
#include "csgan/error.hpp"
#include "csgan/eval.hpp"
#include "helpers.hpp"

using namespace csgan;
using testing::C;
using testing::M;
using testing::S;

namespace {

// Plain exponential recursion; no memo on purpose.
std::size_t naive_edit(const std::vector<std::string>& a, std::size_t i, const std::vector<std::string>& b,
                       std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  std::size_t sub = naive_edit(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);
  std::size_t del = naive_edit(a, i + 1, b, j) + 1;
  std::size_t ins = naive_edit(a, i, b, j + 1) + 1;
  return std::min({sub, del, ins});
}

std::vector<std::vector<std::string>> all_strings(std::size_t max_len, int alphabet) {
  std::vector<std::vector<std::string>> out{{}};
  std::vector<std::vector<std::string>> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::vector<std::string>> next;
    for (const auto& s : frontier)
      for (int c = 0; c < alphabet; ++c) {
        auto t = s;
        t.push_back(std::string(1, static_cast<char>('a' + c)));
        next.push_back(t);
      }
    out.insert(out.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  return out;
}

double bleu1_oracle(const std::vector<std::string>& r, const std::vector<std::string>& h) {
  std::map<std::string, int> rc, hc;
  for (const auto& w : r) rc[w]++;
  for (const auto& w : h) hc[w]++;
  int clipped = 0;
  for (const auto& [w, n] : hc) clipped += std::min(n, rc[w]);
  double p = double(clipped) / double(h.size());
  double bp = h.size() >= r.size() ? 1.0 : std::exp(1.0 - double(r.size()) / double(h.size()));
  return p * bp;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("levenshtein matches the naive recursion exhaustively for short strings") {
    auto strings = all_strings(4, 3);
    for (const auto& a : strings)
      for (const auto& b : strings) REQUIRE(levenshtein(a, b) == naive_edit(a, 0, b, 0));
  }

  TEST_CASE("levenshtein hand cases") {
    std::vector<std::string> kitten{"k", "i", "t", "t", "e", "n"}, sitting{"s", "i", "t", "t", "i", "n", "g"};
    CHECK(levenshtein(kitten, sitting) == 3);
    CHECK(levenshtein(kitten, {}) == 6);
    CHECK(levenshtein({}, {}) == 0);
  }

  TEST_CASE("bleu1 against the counting oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      auto r = testing::random_host(rng, 1 + rng() % 8, 4);
      auto h = testing::random_host(rng, 1 + rng() % 8, 4);
      CHECK(bleu1(r, h) == doctest::Approx(bleu1_oracle(r.surfaces(), h.surfaces())).epsilon(1e-12));
      CHECK(bleu1(r, h) >= 0.0);
      CHECK(bleu1(r, h) <= 1.0);
      CHECK(bleu1(r, r) == 1.0);
    }
  }

  TEST_CASE("bleu1 hand values") {
    // clipped 2 of 4, hypothesis longer than reference: no penalty
    CHECK(bleu1(S("a|h b|h c|h"), S("a|h a|h a|h b|h")) == doctest::Approx(0.5));
    // 2 of 2 matched, reference 4 long: exp(1 - 2)
    CHECK(bleu1(S("a|h b|h c|h d|h"), S("a|h b|h")) == doctest::Approx(std::exp(-1.0)));
    CHECK_THROWS_AS(bleu1(S(""), S("a|h")), DomainError);
  }

  TEST_CASE("corpus bleu pools counts before combining") {
    auto refs = C({"a|h b|h", "c|h d|h e|h f|h"});
    auto hyps = C({"a|h b|h", "c|h"});
    // clipped 3 of 3 hypothesis words, ref length 6 vs hyp 3
    CHECK(corpus_bleu1(refs.sentences, hyps.sentences) == doctest::Approx(std::exp(1.0 - 6.0 / 3.0)));
  }

  TEST_CASE("wer is total edits over total reference words") {
    auto refs = C({"a|h b|h c|h", "d|h e|h"});
    auto hyps = C({"a|h x|h c|h y|h", "e|h"});
    // 1 sub + 1 ins, then 1 del
    CHECK(wer(refs.sentences, hyps.sentences) == doctest::Approx(3.0 / 5.0).epsilon(1e-12));
    CHECK(wer(refs.sentences, refs.sentences) == 0.0);
    // swapping sides keeps the distance, changes the denominator
    CHECK(wer(hyps.sentences, refs.sentences) == doctest::Approx(3.0 / 5.0 * 5.0 / 5.0).epsilon(1e-12));
    auto r2 = C({"a|h b|h c|h d|h"});
    auto h2 = C({"a|h"});
    CHECK(wer(r2.sentences, h2.sentences) == doctest::Approx(0.75));
    CHECK(wer(h2.sentences, r2.sentences) == doctest::Approx(3.0));
    CHECK_THROWS_AS(wer({}, {}), DomainError);
  }

  TEST_CASE("wer against an independent dp on random pairs") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
      auto r = testing::random_host(rng, 1 + rng() % 7, 3);
      auto h = testing::random_host(rng, rng() % 7, 3);
      double expect = double(naive_edit(r.surfaces(), 0, h.surfaces(), 0)) / double(r.size());
      std::vector<Sentence> rs{r}, hs{h};
      CHECK(wer(rs, hs) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("restricted wer: host-only hypothesis misses every guest word") {
    auto refs = C({"a|h output|g c|h", "d|h e|g f|g"});
    auto hyps = C({"a|h b|h c|h", "d|h e2|h f2|h"});
    CHECK(*restricted_wer(refs.sentences, hyps.sentences, Lang::Guest) == doctest::Approx(1.0));
    CHECK(*restricted_wer(refs.sentences, hyps.sentences, Lang::Host) == doctest::Approx(0.0));
    CHECK(*restricted_wer(refs.sentences, refs.sentences, Lang::Guest) == 0.0);
    auto host_refs = C({"a|h b|h"});
    CHECK_FALSE(restricted_wer(host_refs.sentences, host_refs.sentences, Lang::Guest).has_value());
  }

  TEST_CASE("restricted wer: an extra guest insertion counts against the guest side") {
    auto refs = C({"a|h output|g"});
    auto hyps = C({"a|h output|g extra|g"});
    CHECK(*restricted_wer(refs.sentences, hyps.sentences, Lang::Guest) == doctest::Approx(1.0));
    CHECK(*restricted_wer(refs.sentences, hyps.sentences, Lang::Host) == doctest::Approx(0.0));
  }

  TEST_CASE("attributed errors add up to the edit distance") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
      Sentence r, h;
      for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i)
        r.tokens.push_back({"t" + std::to_string(rng() % 3), rng() % 2 ? Lang::Host : Lang::Guest, {}, 0});
      for (std::size_t i = 0, n = rng() % 6; i < n; ++i)
        h.tokens.push_back({"t" + std::to_string(rng() % 3), rng() % 2 ? Lang::Host : Lang::Guest, {}, 0});
      auto e = attributed_errors(r, h);
      CHECK(e.host + e.guest == levenshtein(r.surfaces(), h.surfaces()));
    }
  }

  TEST_CASE("csp metrics") {
    std::vector<SwitchMask> ref{M("0110"), M("100")};
    std::vector<SwitchMask> hyp{M("0100"), M("101")};
    auto s = csp_metrics(ref, hyp);
    CHECK(s.true_positives == 2);
    CHECK(s.predicted == 3);
    CHECK(s.reference == 3);
    CHECK(s.precision == doctest::Approx(2.0 / 3.0));
    CHECK(s.recall == doctest::Approx(2.0 / 3.0));
    CHECK(s.f == doctest::Approx(2.0 / 3.0));
    std::vector<SwitchMask> none{M("0000"), M("000")};
    auto z = csp_metrics(ref, none);
    CHECK(z.precision == 0.0);
    CHECK(z.recall == 0.0);
    CHECK(z.f == 0.0);
    std::vector<SwitchMask> bad{M("01"), M("000")};
    CHECK_THROWS_AS(csp_metrics(ref, bad), AlignmentError);
  }

  TEST_CASE("csp metrics stay in the unit interval and f is the harmonic mean") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<SwitchMask> r, h;
      for (int k = 0; k < 5; ++k) {
        SwitchMask a, b;
        for (int i = 0, n = 1 + int(rng() % 6); i < n; ++i) {
          a.bits.push_back(rng() % 3 == 0);
          b.bits.push_back(rng() % 3 == 0);
        }
        r.push_back(a);
        h.push_back(b);
      }
      auto s = csp_metrics(r, h);
      CHECK(s.precision >= 0.0);
      CHECK(s.precision <= 1.0);
      CHECK(s.recall >= 0.0);
      CHECK(s.recall <= 1.0);
      if (s.precision + s.recall > 0)
        CHECK(s.f == doctest::Approx(2 * s.precision * s.recall / (s.precision + s.recall)));
    }
  }

  TEST_CASE("structural rows for the zh and en baselines") {
    TranslationLexicon lex;
    for (const char* w : {"a", "b", "c", "d"}) lex.set(w, {std::string(w) + "x"});
    auto hosts = C({"a|h b|h c|h", "d|h a|h"});
    auto refs = C({"a|h bx|g c|h", "dx|g a|h"});
    std::mt19937_64 rng(1);
    std::vector<Sentence> zh, en;
    for (const auto& x : hosts.sentences) {
      zh.push_back(apply_baseline(BaselineStrategy::parse("zh"), x, lex, nullptr, rng).sentence);
      en.push_back(apply_baseline(BaselineStrategy::parse("en"), x, lex, nullptr, rng).sentence);
    }
    auto z = evaluate(refs.sentences, zh);
    CHECK(z.csp.precision == 0.0);
    CHECK(z.csp.recall == 0.0);
    CHECK(z.csp.f == 0.0);
    CHECK(*z.wer_guest == doctest::Approx(1.0));
    CHECK(*z.wer_host == doctest::Approx(0.0));
    auto e = evaluate(refs.sentences, en);
    CHECK(e.csp.recall == 1.0);
  }

  TEST_CASE("metric row formatting") {
    MetricReport r;
    r.csp.precision = 0.5;
    r.csp.recall = 0.25;
    r.csp.f = 1.0 / 3.0;
    r.bleu1 = 0.75;
    r.wer_total = 0.125;
    r.wer_guest = 1.0;
    std::ostringstream out;
    write_metric_header(out);
    write_metric_row(out, "m", r);
    CHECK(out.str().rfind("method,precision,recall,f,bleu1,wer,wer_guest,wer_host\n", 0) == 0);
    CHECK(out.str().find("m,0.5000,0.2500,0.3333,0.7500,12.50,100.00,") != std::string::npos);
  }
}
