#pragma once

// Experiment plumbing: planted-rule corpora, augmentation, run configuration,
// manifests and the three experiment harnesses.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csgan/baselines.hpp"
#include "csgan/corpus.hpp"
#include "csgan/eval.hpp"
#include "csgan/gan.hpp"
#include "csgan/lexicon.hpp"
#include "csgan/lm.hpp"

namespace csgan {

inline constexpr const char* kVersion = "0.1.0";

/// Stable per-component seed derived from a run seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(nn::Rng& rng);

// ------------------------------------------------------------ planted rule

struct RuleSpec {
  std::size_t vocab_size = 50;
  std::size_t nouns = 20;
  std::size_t triggers = 5;
  std::size_t heldout_nouns = 0;  // nouns absent from training draws
  double trigger_weight = 0.2;    // share of positions drawn from triggers
  double noun_weight = 0.35;      // share drawn from nouns; the rest from other words
  double p_high = 0.9;            // switch probability of a noun right after a trigger
  double p_low = 0.05;            // everywhere else
  std::size_t min_len = 4;
  std::size_t max_len = 10;
  std::size_t multiword_every = 6;  // every k-th noun translates to two guest words; 0 = never

  void validate() const;
};

struct PlantedWord {
  std::string host;
  std::vector<std::string> guest;
  std::string tag;
  bool trigger = false;
  bool heldout = false;
};

/// Host vocabulary with tags and translations. A position matches the rule
/// when its word is noun-tagged and the previous word is a trigger.
struct PlantedRule {
  RuleSpec spec;
  std::vector<PlantedWord> words;

  bool matches(const Sentence& x, std::size_t n) const;
  TranslationLexicon lexicon() const;
  TagSet tagset() const;
  PosLexicon pos_lexicon() const;
};

/// Deterministic: the vocabulary depends on the spec only.
PlantedRule make_rule(const RuleSpec& spec);

RuleSpec load_rule_spec(std::istream& in);
RuleSpec load_rule_spec_file(const std::string& path);
void write_rule_spec(std::ostream& out, const RuleSpec& spec);

struct SynthCorpus {
  Corpus host;
  Corpus cs;
  std::vector<SwitchMask> masks;
};

/// Host sentences from the rule vocabulary plus their code-switched versions,
/// each switch bit drawn with p_high on rule positions and p_low elsewhere.
SynthCorpus synth_corpus(const PlantedRule& rule, std::size_t n_sentences, std::uint64_t seed,
                         bool include_heldout = true);

void write_masks(std::ostream& out, const std::vector<SwitchMask>& masks);

/// Keeps the pairs whose code-switched side holds at least one guest token.
SynthCorpus only_switched(const SynthCorpus& s);

/// Draws rounds of sentences until exactly `n` switched pairs are collected.
SynthCorpus synth_switched(const PlantedRule& rule, std::size_t n, std::uint64_t seed, bool include_heldout = true);

// ------------------------------------------------------------ augmentation

using SentenceGenerator = std::function<Sentence(const Sentence& host, nn::Rng& rng)>;

struct Augmentation {
  Corpus corpus;  // originals first, then generated sentences
  std::size_t originals = 0;
  std::size_t generated = 0;
  std::string strategy;
  std::uint64_t seed = 0;
};

Augmentation augment(const Corpus& train_cs, const Corpus& hosts, const SentenceGenerator& generator,
                     const std::string& strategy, std::uint64_t seed, std::size_t per_sentence = 1);
void write_augment_report(std::ostream& out, const Augmentation& a);

SentenceGenerator baseline_generator(BaselineStrategy strategy, const TranslationLexicon& lex, const PosLexicon* pos);
SentenceGenerator gan_generator(const GanModel& model, GenerateMode mode, const TranslationLexicon& lex,
                                const PosLexicon* pos, NoiseMode noise);

// ------------------------------------------------------------ run config

struct RunConfig {
  std::uint64_t seed = 1;
  int experiment = 1;

  struct Paths {
    std::string output_dir = "out";
    std::string cs_train;
    std::string host_train;
    std::string test_cs;
    std::string test_host;
    std::string dev;
    std::string lexicon;
    std::string pos_lexicon;
    std::string tagset;
  } paths;

  RuleSpec rule;
  std::size_t n_cs_train = 2000;
  std::size_t n_host_train = 2000;
  std::size_t n_test = 200;
  std::size_t n_dev = 200;

  GanArch arch;
  TrainConfig train;
  std::size_t vocab_max = 20000;
  CharLmConfig charlm;

  std::optional<double> random_p;          // default: cs-rate of the CS training set
  GenerateMode text_mode = GenerateMode::Sample;
  bool exp2_lm_with_host = false;          // LM training text = CS train (+ host train)
  std::size_t augment_per_sentence = 1;
  std::size_t augment_limit = 0;           // host sentences used for augmentation; 0 = all
  std::vector<std::string> exp3_methods = {"random", "noun", "proposed", "proposed_pos"};

  bool synthetic() const { return paths.cs_train.empty(); }
};

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);
/// INI snapshot that parses back to the same configuration.
void write_run_config(std::ostream& out, const RunConfig& cfg);
/// Throws ConfigError naming every configured input path that does not exist.
void validate_paths(const RunConfig& cfg);

/// Key/value text written next to outputs.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(std::string key, std::string value) { entries.emplace_back(std::move(key), std::move(value)); }
  void add_config(const RunConfig& cfg);
  void write(std::ostream& out) const;
  void save(const std::string& path) const;
};

// ------------------------------------------------------------ experiments

struct ExperimentData {
  Corpus cs_train;
  Corpus host_train;
  Corpus test_cs;    // gold code-switched references
  Corpus test_host;  // aligned host-only inputs
  Corpus dev;
  TranslationLexicon lex;
  std::optional<PosLexicon> pos;
};

/// Loads configured files, or synthesizes every corpus from the planted rule.
ExperimentData load_experiment_data(const RunConfig& cfg);

/// Trains one proposed generator (with or without POS input) on the CS and host training sets.
struct TrainedGan {
  GanModel model;
  std::vector<EpochStats> history;
};
TrainedGan train_proposed(const ExperimentData& data, const RunConfig& cfg, bool use_pos);

struct Exp1Row {
  std::string method;
  std::optional<MetricReport> report;
  std::string skip_reason;
};

struct PplRow {
  std::string method;
  std::optional<double> ngram;
  std::optional<double> rnnlm;
  std::string skip_reason;
};

struct Exp3Column {
  std::string method;
  std::optional<double> dev;
  std::optional<double> test;
  std::string skip_reason;
};

/// Lazily trained generators shared by the experiment harnesses.
class ProposedCache {
 public:
  ProposedCache(const ExperimentData& data, const RunConfig& cfg) : data_(data), cfg_(cfg) {}
  const TrainedGan& get(bool use_pos);

 private:
  const ExperimentData& data_;
  const RunConfig& cfg_;
  std::optional<TrainedGan> plain_;
  std::optional<TrainedGan> pos_;
};

std::vector<Exp1Row> run_exp1(const ExperimentData& data, const RunConfig& cfg, ProposedCache& models);
std::vector<PplRow> run_exp2(const ExperimentData& data, const RunConfig& cfg, ProposedCache& models);
std::vector<Exp3Column> run_exp3(const ExperimentData& data, const RunConfig& cfg, ProposedCache& models);

void write_exp1_table(std::ostream& out, const std::vector<Exp1Row>& rows);
void write_exp2_table(std::ostream& out, const std::vector<PplRow>& rows);
void write_exp3_table(std::ostream& out, const std::vector<Exp3Column>& columns);

/// Runs one experiment and writes its table, generator histories and a
/// manifest into the configured output directory. Returns the written paths.
std::vector<std::string> run_experiment(int exp, const RunConfig& cfg, const std::string& command_line);

}  // namespace csgan
