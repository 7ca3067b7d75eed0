#include <doctest.h>

#include <set>
#include <sstream>

#include "csgan/error.hpp"
#include "csgan/pipeline.hpp"
#include "helpers.hpp"

using namespace csgan;
using testing::C;
using testing::S;

namespace {

RuleSpec toy_spec() {
  RuleSpec r;
  r.vocab_size = 20;
  r.nouns = 8;
  r.triggers = 3;
  r.heldout_nouns = 2;
  r.min_len = 3;
  r.max_len = 7;
  return r;
}

std::string corpus_text(const Corpus& c) {
  std::ostringstream o;
  write_corpus(o, c);
  return o.str();
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("derived seeds") {
    // Empty label leaves the FNV offset basis; xor with it gives zero, and the
    // first splitmix64 output from state zero is a published constant.
    CHECK(derive_seed(0xcbf29ce484222325ULL, "") == 0xe220a8397b1dcdafULL);
    CHECK(derive_seed(7, "gan.init") == derive_seed(7, "gan.init"));
    std::set<std::uint64_t> seen;
    for (std::uint64_t base : {1, 2, 3})
      for (const char* label : {"gan.init", "gan.train", "charlm", "augment"}) seen.insert(derive_seed(base, label));
    CHECK(seen.size() == 12);
  }

  TEST_CASE("rule settings validation") {
    auto r = toy_spec();
    CHECK_NOTHROW(r.validate());
    auto bad = r;
    bad.heldout_nouns = bad.nouns;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = r;
    bad.p_low = 0.95;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = r;
    bad.triggers = 15;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = r;
    bad.trigger_weight = 0.8;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("planted rule vocabulary") {
    auto rule = make_rule(toy_spec());
    REQUIRE(rule.words.size() == 20);
    std::size_t triggers = 0, nouns = 0, heldout = 0;
    std::set<std::string> hosts;
    for (const auto& w : rule.words) {
      triggers += w.trigger;
      nouns += w.tag == "n";
      heldout += w.heldout;
      hosts.insert(w.host);
      CHECK(!w.guest.empty());
      if (w.heldout) CHECK(w.tag == "n");
    }
    CHECK(triggers == 3);
    CHECK(nouns == 8);
    CHECK(heldout == 2);
    CHECK(hosts.size() == 20);
    CHECK(rule.lexicon().size() == 20);
    CHECK(make_rule(toy_spec()).lexicon().size() == rule.lexicon().size());
  }

  TEST_CASE("synthetic corpora: determinism and mask consistency") {
    auto rule = make_rule(toy_spec());
    auto a = synth_corpus(rule, 200, 11);
    auto b = synth_corpus(rule, 200, 11);
    auto c = synth_corpus(rule, 200, 12);
    CHECK(corpus_text(a.cs) == corpus_text(b.cs));
    CHECK(corpus_text(a.cs) != corpus_text(c.cs));
    REQUIRE(a.masks.size() == 200);
    auto lex = rule.lexicon();
    std::size_t rule_hits = 0, rule_switched = 0, other = 0, other_switched = 0;
    for (std::size_t i = 0; i < a.host.size(); ++i) {
      const auto& x = a.host.sentences[i];
      REQUIRE(a.masks[i].size() == x.size());
      CHECK(corpus_text(Corpus{{realize(x, a.masks[i], lex)}}) == corpus_text(Corpus{{a.cs.sentences[i]}}));
      for (std::size_t n = 0; n < x.size(); ++n) {
        CHECK(x.tokens[n].lang == Lang::Host);
        if (rule.matches(x, n)) {
          ++rule_hits;
          rule_switched += a.masks[i].bits[n];
        } else {
          ++other;
          other_switched += a.masks[i].bits[n];
        }
      }
    }
    REQUIRE(rule_hits > 20);
    CHECK(double(rule_switched) / double(rule_hits) > 0.7);
    CHECK(double(other_switched) / double(other) < 0.15);
  }

  TEST_CASE("held-out nouns are kept out on request") {
    auto rule = make_rule(toy_spec());
    std::set<std::string> heldout;
    for (const auto& w : rule.words)
      if (w.heldout) heldout.insert(w.host);
    auto s = synth_corpus(rule, 300, 5, false);
    for (const auto& x : s.host.sentences)
      for (const auto& t : x.tokens) CHECK(heldout.count(t.surface) == 0);
    auto with = synth_corpus(rule, 300, 5, true);
    bool any = false;
    for (const auto& x : with.host.sentences)
      for (const auto& t : x.tokens) any = any || heldout.count(t.surface);
    CHECK(any);
  }

  TEST_CASE("switched-only corpora have exact size") {
    auto rule = make_rule(toy_spec());
    for (std::size_t n : {1, 17, 120}) {
      auto s = synth_switched(rule, n, 3);
      CHECK(s.cs.size() == n);
      CHECK(s.host.size() == n);
      for (std::size_t i = 0; i < n; ++i) CHECK(s.masks[i].count() > 0);
    }
    auto all = synth_corpus(rule, 100, 9);
    auto only = only_switched(all);
    for (const auto& m : only.masks) CHECK(m.count() > 0);
    CHECK_THROWS_AS(synth_corpus(rule, 0, 1), DomainError);
  }

  TEST_CASE("rule settings ini round trip") {
    auto r = toy_spec();
    r.p_high = 0.8125;
    std::stringstream io;
    write_rule_spec(io, r);
    auto back = load_rule_spec(io);
    std::stringstream again;
    write_rule_spec(again, back);
    CHECK(again.str() == io.str());
    CHECK(back.p_high == 0.8125);
    CHECK(back.heldout_nouns == 2);
  }

  TEST_CASE("run config parsing") {
    std::istringstream in(
        "seed = 9\n[gan]\nhidden = 7\ndisc_encoder = private\n[synth]\nnouns = 6\n[baselines]\nrandom_p = 0.3\n");
    auto cfg = parse_run_config(in);
    CHECK(cfg.seed == 9);
    CHECK(cfg.arch.hidden == 7);
    CHECK(cfg.arch.disc_encoder == DiscEncoder::Private);
    CHECK(cfg.rule.nouns == 6);
    CHECK(cfg.random_p == 0.3);
    CHECK(cfg.synthetic());

    std::stringstream snap;
    write_run_config(snap, cfg);
    auto back = parse_run_config(snap);
    std::stringstream snap2;
    write_run_config(snap2, back);
    CHECK(snap.str() == snap2.str());

    std::istringstream unknown("[gan]\nhiden = 3\n");
    CHECK_THROWS_AS(parse_run_config(unknown), ConfigError);
    std::istringstream bad_enum("[gan]\npooling = median\n");
    CHECK_THROWS_AS(parse_run_config(bad_enum), ConfigError);
    std::istringstream bad_p("[baselines]\nrandom_p = 1.5\n");
    CHECK_THROWS_AS(parse_run_config(bad_p), ConfigError);
    std::istringstream bad_exp("exp = 4\n");
    CHECK_THROWS_AS(parse_run_config(bad_exp), ConfigError);
  }

  TEST_CASE("input path validation") {
    RunConfig cfg;
    CHECK_NOTHROW(validate_paths(cfg));
    cfg.paths.cs_train = "/nonexistent/cs.txt";
    CHECK_THROWS_AS(validate_paths(cfg), ConfigError);
    try {
      validate_paths(cfg);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("paths.cs_train") != std::string::npos);
    }
  }

  TEST_CASE("augmentation keeps originals first") {
    auto cs = C({"a|h b|g", "c|h"});
    auto hosts = C({"x|h", "y|h z|h", "w|h"});
    std::size_t calls = 0;
    SentenceGenerator gen = [&](const Sentence& x, nn::Rng&) {
      ++calls;
      return x;
    };
    auto a = augment(cs, hosts, gen, "copy", 4, 2);
    CHECK(a.originals == 2);
    CHECK(a.generated == 6);
    CHECK(calls == 6);
    REQUIRE(a.corpus.size() == 8);
    CHECK(a.corpus.sentences[0].tokens[0].surface == "a");
    CHECK(a.corpus.sentences[2].tokens[0].surface == "x");
    CHECK(a.corpus.sentences[4].tokens[0].surface == "y");
    std::ostringstream rep;
    write_augment_report(rep, a);
    CHECK(rep.str() == "strategy\tcopy\nseed\t4\noriginals\t2\ngenerated\t6\ntotal\t8\n");
  }

  TEST_CASE("augmentation with the random baseline is reproducible") {
    auto rule = make_rule(toy_spec());
    auto lex = rule.lexicon();
    auto s = synth_corpus(rule, 30, 2);
    auto gen = baseline_generator(BaselineStrategy{BaselineKind::Random, 0.5}, lex, nullptr);
    auto a = augment(s.cs, s.host, gen, "random", 8);
    auto b = augment(s.cs, s.host, gen, "random", 8);
    CHECK(corpus_text(a.corpus) == corpus_text(b.corpus));
    CHECK(a.corpus.size() == 60);
  }

  TEST_CASE("manifest and tables") {
    Manifest m;
    m.add("command", "csgan stats");
    m.add("seed", "3");
    std::ostringstream o;
    m.write(o);
    CHECK(o.str() == "command\tcsgan stats\nseed\t3\n");
    Manifest withcfg;
    withcfg.add_config(RunConfig{});
    bool has_seed = false;
    for (const auto& [k, v] : withcfg.entries) has_seed = has_seed || (k == "config.seed" && v == "1");
    CHECK(has_seed);

    std::ostringstream t1;
    write_exp1_table(t1, {Exp1Row{"zh", MetricReport{}, ""}, Exp1Row{"proposed_pos", std::nullopt, "no pos"}});
    auto text = t1.str();
    CHECK(text.rfind("method,precision,recall,f,bleu1,wer,wer_guest,wer_host\n", 0) == 0);
    CHECK(text.find("proposed_pos,skipped,skipped,skipped,skipped,skipped,skipped,skipped\n") != std::string::npos);

    std::ostringstream t2;
    write_exp2_table(t2, {PplRow{"ZH", 12.5, std::nullopt, ""}});
    CHECK(t2.str().rfind("method,ngram_ppl,rnnlm_ppl\n", 0) == 0);
  }
}
