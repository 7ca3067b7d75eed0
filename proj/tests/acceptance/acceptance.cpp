// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: csgan_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "csgan/baselines.hpp"
#include "csgan/eval.hpp"
#include "csgan/gan.hpp"
#include "csgan/lm.hpp"
#include "csgan/neural.hpp"
#include "csgan/pipeline.hpp"
#include "helpers.hpp"
#include "kn_oracle.hpp"

using namespace csgan;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

std::string sci(double v) {
  std::ostringstream o;
  o.setf(std::ios::scientific);
  o.precision(2);
  o << v;
  return o.str();
}

RunConfig config_from(const std::string& ini) {
  std::istringstream in(ini);
  return parse_run_config(in);
}

// ---------------------------------------------------------------- 1

Verdict structural_rows() {
  RuleSpec spec;
  auto rule = make_rule(spec);
  auto lex = rule.lexicon();
  auto data = synth_switched(rule, 300, 41);
  std::mt19937_64 rng(1);
  std::vector<Sentence> zh, en;
  for (const auto& x : data.host.sentences) {
    zh.push_back(apply_baseline({BaselineKind::ZH}, x, lex, nullptr, rng).sentence);
    en.push_back(apply_baseline({BaselineKind::EN}, x, lex, nullptr, rng).sentence);
  }
  auto z = evaluate(data.cs.sentences, zh);
  auto e = evaluate(data.cs.sentences, en);
  bool pass = z.csp.precision == 0.0 && z.csp.recall == 0.0 && z.csp.f == 0.0 && z.wer_guest == 1.0 &&
              z.wer_host == 0.0 && e.csp.recall == 1.0;
  return {pass, "ZH P/R/F " + num(z.csp.precision) + "/" + num(z.csp.recall) + "/" + num(z.csp.f) + " guest-WER " +
                    num(*z.wer_guest * 100, 2) + "% host-WER " + num(*z.wer_host * 100, 2) + "%, EN recall " +
                    num(e.csp.recall)};
}

// ---------------------------------------------------------------- 2

Verdict random_calibration() {
  RuleSpec spec;
  auto rule = make_rule(spec);
  auto lex = rule.lexicon();
  auto host = synth_corpus(rule, 20000, 7).host;
  std::mt19937_64 rng(derive_seed(1, "acceptance.random"));
  std::size_t switchable = 0, switched = 0;
  for (const auto& x : host.sentences) {
    auto r = apply_baseline({BaselineKind::Random, 0.2}, x, lex, nullptr, rng);
    auto sw = switchable_positions(x, lex);
    switchable += std::size_t(std::count(sw.begin(), sw.end(), true));
    switched += r.mask.count();
  }
  double frac = double(switched) / double(switchable);
  return {switchable >= 100000 && std::abs(frac - 0.2) <= 0.005,
          "fraction " + num(frac, 5) + " over " + std::to_string(switchable) + " switchable tokens"};
}

// ---------------------------------------------------------------- 3

using Tokens = std::vector<std::string>;

std::size_t naive_edit(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  return std::min({naive_edit(a, i + 1, b, j) + 1, naive_edit(a, i, b, j + 1) + 1,
                   naive_edit(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1)});
}

void all_strings(std::size_t max_len, std::vector<Tokens>& out) {
  out.push_back({});
  for (std::size_t begin = 0, len = 1; len <= max_len; ++len) {
    std::size_t end = out.size();
    for (std::size_t k = begin; k < end; ++k)
      if (out[k].size() == len - 1)
        for (const char* s : {"a", "b", "c"}) {
          auto t = out[k];
          t.push_back(s);
          out.push_back(std::move(t));
        }
    begin = end;
  }
}

Sentence sentence_of(const Tokens& t) {
  Sentence s;
  for (const auto& w : t) s.tokens.push_back({w, Lang::Host, {}, 0});
  return s;
}

// Clipped unigram precision with brevity penalty, from raw counts.
double bleu1_oracle(const Tokens& ref, const Tokens& hyp) {
  if (hyp.empty()) return 0.0;
  std::map<std::string, int> rc, hc;
  for (const auto& w : ref) ++rc[w];
  for (const auto& w : hyp) ++hc[w];
  double clipped = 0;
  for (const auto& [w, c] : hc) clipped += std::min(c, rc[w]);
  double bp = hyp.size() >= ref.size() ? 1.0 : std::exp(1.0 - double(ref.size()) / double(hyp.size()));
  return bp * clipped / double(hyp.size());
}

Verdict metric_oracles() {
  std::vector<Tokens> strings;
  all_strings(6, strings);
  std::size_t pairs = 0, mismatches = 0;
  for (const auto& a : strings)
    for (const auto& b : strings) {
      ++pairs;
      if (levenshtein(a, b) != naive_edit(a, 0, b, 0)) ++mismatches;
    }

  // hand-checked anchors
  double anchor_err = 0.0;
  auto S = [](std::initializer_list<const char*> w) { return sentence_of(Tokens(w.begin(), w.end())); };
  anchor_err = std::max(anchor_err, std::abs(bleu1(S({"a", "b", "c", "d"}), S({"a", "b", "x", "d"})) - 0.75));
  anchor_err = std::max(anchor_err, std::abs(bleu1(S({"a", "b", "c", "d"}), S({"a", "b"})) - std::exp(-1.0)));
  anchor_err = std::max(anchor_err, std::abs(bleu1(S({"a"}), S({"a", "a", "a"})) - 1.0 / 3.0));
  {
    std::vector<Sentence> r{S({"a", "b", "c"}), S({"d", "e"})}, h{S({"a", "c"}), S({"d", "x", "e"})};
    anchor_err = std::max(anchor_err, std::abs(wer(r, h) - 2.0 / 5.0));
  }

  std::mt19937_64 rng(2024);
  double max_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto draw = [&](std::size_t min_len) {
      Tokens t(min_len + rng() % 8);
      for (auto& w : t) w = std::string(1, char('a' + rng() % 5));
      return t;
    };
    auto ref = draw(1), hyp = draw(1);
    auto r = sentence_of(ref), h = sentence_of(hyp);
    max_err = std::max(max_err, std::abs(bleu1(r, h) - bleu1_oracle(ref, hyp)));
    std::vector<Sentence> rs{r}, hs{h};
    double w_oracle = double(naive_edit(ref, 0, hyp, 0)) / double(ref.size());
    max_err = std::max(max_err, std::abs(wer(rs, hs) - w_oracle));
  }
  return {mismatches == 0 && anchor_err <= 1e-12 && max_err <= 1e-12,
          std::to_string(pairs) + " exhaustive Levenshtein pairs, " + std::to_string(mismatches) +
              " mismatches; BLEU-1/WER max error " + sci(std::max(max_err, anchor_err)) + " on 100 random pairs"};
}

// ---------------------------------------------------------------- 4

Verdict kn_correctness() {
  RuleSpec spec;
  auto rule = make_rule(spec);
  auto train = synth_corpus(rule, 50, 3).cs;
  auto test = synth_corpus(rule, 50, 4).cs;
  auto kn = train_kn(train);
  const auto& v = kn.vocab();
  double worst_sum = 0.0;
  std::size_t contexts = 0;
  for (std::int32_t u = 0; u < std::int32_t(v.size()); ++u)
    for (std::int32_t w2 = 0; w2 < std::int32_t(v.size()); ++w2) {
      if (u == Vocabulary::kEos || w2 == Vocabulary::kEos) continue;
      double sum = 0.0;
      for (std::int32_t w = 0; w < std::int32_t(v.size()); ++w) sum += kn.prob(w, u, w2);
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      ++contexts;
    }
  std::set<std::string> surfaces;
  for (const auto& s : train.sentences)
    for (const auto& t : s.tokens) surfaces.insert(t.surface);
  oracle::KneserNey ref(train, surfaces);
  double rel = 0.0;
  for (const Corpus* c : {&train, &test}) {
    auto r = ngram_ppl(kn, *c);
    auto [ll, n] = ref.score(*c);
    double oracle_ppl = std::exp(-ll / double(n));
    rel = std::max(rel, std::abs(r.ppl() - oracle_ppl) / oracle_ppl);
    if (r.count != n) rel = 1.0;
  }
  return {worst_sum <= 1e-9 && rel <= 1e-9, std::to_string(contexts) + " contexts, max |sum-1| " + sci(worst_sum) +
                                                ", PPL relative error vs oracle " + sci(rel)};
}

// ---------------------------------------------------------------- 5

using nn::Matrix;
using nn::NodeId;
using nn::ParamBlock;
using nn::Tape;

void spread(ParamBlock& p, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (Eigen::Index k = 0; k < p.value(i).size(); ++k) p.value(i).data()[k] = u(rng);
}

// <graph output, R> for a random R, differentiated against every parameter.
double graph_error(ParamBlock& p, const std::function<NodeId(Tape&)>& build, std::mt19937_64& rng) {
  Matrix r;
  {
    Tape t(p, false);
    const Matrix& out = t.value(build(t));
    r = Matrix::NullaryExpr(out.rows(), out.cols(), [&] { return std::uniform_real_distribution<double>(-1, 1)(rng); });
  }
  Tape tape(p);
  auto g = tape.backward(build(tape), r);
  auto f = [&] {
    Tape t(p, false);
    return (t.value(build(t)).array() * r.array()).sum();
  };
  return testing::max_fd_error(p, f, g);
}

std::vector<std::int32_t> ids_of(std::size_t n, std::int32_t vocab, std::mt19937_64& rng) {
  std::vector<std::int32_t> ids(n);
  for (auto& i : ids) i = std::int32_t(rng() % std::uint64_t(vocab));
  return ids;
}

Verdict gradient_exactness() {
  const int seeds = 20;
  std::map<std::string, double> worst;
  auto note = [&](const std::string& what, double e) { worst[what] = std::max(worst[what], e); };
  for (int seed = 1; seed <= seeds; ++seed) {
    std::mt19937_64 rng(seed);
    {
      ParamBlock p;
      auto emb = nn::add_embedding(p, "emb", 7, 3);
      auto d = nn::add_dense(p, "d", 3, 4);
      p.initialize(seed);
      spread(p, rng, 0.6);
      auto ids = ids_of(1 + rng() % 5, 7, rng);
      note("embed+dense", graph_error(p, [&](Tape& t) { return nn::dense(t, d, nn::embed(t, emb, ids)); }, rng));
      note("dense_sigmoid", graph_error(p, [&](Tape& t) { return nn::dense_sigmoid(t, d, nn::embed(t, emb, ids)); }, rng));
    }
    {
      ParamBlock p;
      auto emb = nn::add_embedding(p, "emb", 6, 3);
      auto l = nn::add_lstm(p, "lstm", 3, 4);
      auto b = nn::add_blstm(p, "blstm", 3, 3);
      auto d = nn::add_dense(p, "head", 6, 1);
      p.initialize(seed);
      spread(p, rng, 0.6);
      auto ids = ids_of(1 + rng() % 6, 6, rng);
      note("lstm", graph_error(p, [&](Tape& t) { return nn::lstm(t, l, nn::embed(t, emb, ids)); }, rng));
      note("lstm reversed", graph_error(p, [&](Tape& t) { return nn::lstm(t, l, nn::embed(t, emb, ids), true); }, rng));
      note("blstm+final_states", graph_error(p, [&](Tape& t) {
             return nn::dense_sigmoid(t, d, nn::final_states(t, nn::blstm(t, b, nn::embed(t, emb, ids))));
           }, rng));
      note("blstm+mean_rows", graph_error(p, [&](Tape& t) {
             return nn::dense(t, d, nn::mean_rows(t, nn::blstm(t, b, nn::embed(t, emb, ids))));
           }, rng));
    }
    {
      ParamBlock p;
      auto emb = nn::add_embedding(p, "emb", 5, 3);
      auto row = nn::add_embedding(p, "row", 1, 2);
      auto d = nn::add_dense(p, "out", 5, 4);
      p.initialize(seed);
      spread(p, rng, 0.6);
      auto ids = ids_of(2 + rng() % 4, 5, rng);
      auto targets = ids_of(ids.size(), 4, rng);
      std::uint64_t drop_seed = rng();
      note("concat/broadcast/sigmoid/dropout/softmax_xent/sum", graph_error(p, [&](Tape& t) {
             NodeId e = nn::embed(t, emb, ids);
             NodeId z = nn::broadcast_rows(t, nn::embed(t, row, std::vector<std::int32_t>{0}), Eigen::Index(ids.size()));
             nn::Rng dr(drop_seed);
             NodeId h = nn::dropout(t, nn::sigmoid(t, nn::concat_cols(t, e, z)), 0.3, dr, nn::Mode::Train);
             return nn::sum_all(t, nn::softmax_xent(t, nn::dense(t, d, h), targets));
           }, rng));
    }
  }

  // composed generator and discriminator graphs
  RuleSpec spec;
  spec.vocab_size = 12;
  spec.nouns = 5;
  spec.triggers = 2;
  spec.min_len = 2;
  spec.max_len = 6;
  auto rule = make_rule(spec);
  auto lex = rule.lexicon();
  auto pos = rule.pos_lexicon();
  auto data = synth_corpus(rule, 40, 1);
  for (int seed = 1; seed <= seeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    GanArch a;
    a.word_dim = 4;
    a.pos_dim = 3;
    a.hidden = 3;
    a.noise_dim = 2;
    a.use_pos = seed % 2 == 0;
    a.disc_encoder = seed % 3 == 0 ? DiscEncoder::Private : DiscEncoder::Shared;
    a.pooling = seed % 4 == 0 ? Pooling::Mean : Pooling::FinalStates;
    GanModel model(build_gan_vocab(data.cs, data.host, lex, 1000), rule.tagset(), a, std::uint64_t(seed));
    spread(model.params(), rng, 0.5);

    const auto& x = data.host.sentences[std::size_t(seed) % data.host.size()];
    auto enc = model.encode(x, &pos);
    auto sw = switchable_positions(x, lex);
    Matrix z = sample_noise(a.noise_dim, x.size(), NoiseMode::PerSentence, rng);
    auto ms = sample_mask(generator_probs(model, enc, z), sw, rng);
    auto g = policy_gradient(model, enc, z, ms.mask, sw, 1.0);
    auto gl = [&] { return -mask_log_prob(generator_probs(model, enc, z), ms.mask, sw); };
    note("generator", testing::max_fd_error(model.params(), gl, g, {"enc.", "gen."}));

    const auto& y = data.cs.sentences[std::size_t(seed) % data.cs.size()];
    auto ency = model.encode(y, &pos);
    std::uint64_t drop_seed = rng();
    Tape tape(model.params());
    nn::Rng r1(drop_seed);
    auto out = model.discriminator_graph(tape, ency, nn::Mode::Train, r1);
    auto gd = tape.backward(out, Matrix::Constant(1, 1, -1.0 / tape.value(out)(0, 0)));
    auto dl = [&] {
      Tape t(model.params(), false);
      nn::Rng r2(drop_seed);
      return -std::log(t.value(model.discriminator_graph(t, ency, nn::Mode::Train, r2))(0, 0));
    };
    note("discriminator", testing::max_fd_error(model.params(), dl, gd));
  }

  double overall = 0.0;
  std::string name;
  for (const auto& [k, e] : worst)
    if (e >= overall) {
      overall = e;
      name = k;
    }
  return {overall < 1e-5, std::to_string(worst.size()) + " graph families x " + std::to_string(seeds) +
                              " seeds, max relative error " + sci(overall) + " (" + name + ")"};
}

// ---------------------------------------------------------------- 6

Verdict reinforce_unbiased() {
  std::vector<double> s{0.3, 0.6, 0.45};
  std::vector<double> reward{0.1, -0.4, 0.9, 0.3, -1.2, 0.5, 0.8, 0.05};  // fixed scorer, one value per mask
  std::vector<bool> sw(3, true);
  std::vector<double> exact(3, 0.0);
  for (std::size_t m = 0; m < 8; ++m)
    for (std::size_t k = 0; k < 3; ++k) {
      double d = (m >> k) & 1 ? 1.0 : -1.0;
      for (std::size_t j = 0; j < 3; ++j)
        if (j != k) d *= (m >> j) & 1 ? s[j] : 1.0 - s[j];
      exact[k] += reward[m] * d;
    }
  std::mt19937_64 rng(derive_seed(1, "acceptance.reinforce"));
  const int n = 100000;
  std::vector<double> sum(3, 0.0), sq(3, 0.0);
  for (int i = 0; i < n; ++i) {
    auto ms = sample_mask(s, sw, rng);
    std::size_t idx = 0;
    for (std::size_t k = 0; k < 3; ++k) idx |= std::size_t(ms.mask.bits[k]) << k;
    auto g = mask_log_prob_grad(s, ms.mask, sw);
    for (std::size_t k = 0; k < 3; ++k) {
      double e = reward[idx] * g[k];
      sum[k] += e;
      sq[k] += e * e;
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double mean = sum[k] / n;
    double se = std::sqrt((sq[k] / n - mean * mean) / n);
    worst = std::max(worst, std::abs(mean - exact[k]) / se);
  }
  return {worst <= 3.0, "worst component deviation " + num(worst, 2) + " standard errors over " + std::to_string(n) +
                            " samples"};
}

// ---------------------------------------------------------------- 7

const char* kGanSettings =
    "[gan]\nword_dim = 16\nhidden = 16\npos_dim = 8\nnoise_dim = 4\nepochs = 40\n"
    "disc_encoder = private\nd_step_size = 0.003\ng_step_size = 0.003\n";

Verdict planted_rule() {
  auto cfg = config_from(std::string("seed = 1\n[synth]\nn_cs_train = 2000\nn_host_train = 2000\nn_test = 400\n"
                                     "heldout_nouns = 5\n") + kGanSettings);
  auto data = load_experiment_data(cfg);
  ProposedCache models(data, cfg);
  auto rows = run_exp1(data, cfg, models);
  std::map<std::string, double> f;
  for (const auto& r : rows)
    if (r.report) f[r.method] = r.report->csp.f;
  if (!f.count("random") || !f.count("proposed") || !f.count("proposed_pos")) return {false, "missing rows"};
  double gap = f["proposed"] - f["random"];
  return {gap >= 0.15 && f["proposed_pos"] >= f["proposed"],
          "F random " + num(f["random"]) + ", proposed " + num(f["proposed"]) + " (gap " + num(gap) +
              "), proposed+pos " + num(f["proposed_pos"]) + " after " + std::to_string(cfg.train.epochs) + " epochs"};
}

// ---------------------------------------------------------------- 8

Verdict augmentation_helps() {
  int ok = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto cfg = config_from("seed = " + std::to_string(seed) +
                           "\n[synth]\nn_cs_train = 200\nn_host_train = 1000\nn_test = 200\nn_dev = 200\n" +
                           kGanSettings +
                           "[charlm]\nhidden = 32\ndropout = 0.2\nstep_size = 0.01\nepochs = 15\npatience = 3\n"
                           "[experiment]\nexp3_methods = random,proposed\n");
    auto data = load_experiment_data(cfg);
    ProposedCache models(data, cfg);
    auto cols = run_exp3(data, cfg, models);
    std::map<std::string, double> dev;
    for (const auto& c : cols)
      if (c.dev) dev[c.method] = *c.dev;
    bool good = dev.count("train") && dev.count("random") && dev.count("proposed") &&
                dev["proposed"] <= dev["train"] && dev["random"] <= dev["train"];
    ok += good;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " dev PPL train " +
              num(dev["train"], 2) + " random " + num(dev["random"], 2) + " gan " + num(dev["proposed"], 2);
  }
  return {ok >= 2, std::to_string(ok) + "/3 seeds satisfy (" + detail + ")"};
}

// ---------------------------------------------------------------- 9

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out[e.path().filename().string()] = s.str();
  }
  return out;
}

Verdict determinism() {
  auto dir = fs::temp_directory_path() / "csgan_acceptance_determinism";
  auto cfg = config_from(
      "seed = 5\n[synth]\nn_cs_train = 200\nn_host_train = 200\nn_test = 40\nn_dev = 40\n"
      "[gan]\nword_dim = 8\npos_dim = 4\nhidden = 8\nnoise_dim = 2\nepochs = 2\ndisc_encoder = private\n"
      "[charlm]\nhidden = 8\nepochs = 2\nstep_size = 0.01\ndropout = 0.2\n");
  cfg.paths.output_dir = dir.string();
  std::size_t files = 0;
  bool same = true;
  for (int exp : {1, 3}) {
    fs::remove_all(dir);
    run_experiment(exp, cfg, "csgan_acceptance");
    auto first = snapshot(dir);
    fs::remove_all(dir);
    run_experiment(exp, cfg, "csgan_acceptance");
    auto second = snapshot(dir);
    same = same && first == second && !first.empty();
    files += first.size();
  }
  fs::remove_all(dir);
  return {same, std::to_string(files) + " report files from experiments 1 and 3 compared byte for byte"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"structural ZH/EN rows", structural_rows},
      {"random baseline calibration", random_calibration},
      {"metric oracles", metric_oracles},
      {"Kneser-Ney correctness", kn_correctness},
      {"gradient exactness", gradient_exactness},
      {"REINFORCE unbiasedness", reinforce_unbiased},
      {"GAN learns a planted rule", planted_rule},
      {"augmentation helps", augmentation_helps},
      {"determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    int id = int(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !v.pass;
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << " -- "
              << v.detail << " [" << num(secs, 1) << "s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
