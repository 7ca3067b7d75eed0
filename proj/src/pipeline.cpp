#include "csgan/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "csgan/error.hpp"

namespace csgan {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = base ^ h;  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(nn::Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

namespace {

std::size_t uniform_index(nn::Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

// ------------------------------------------------------------ planted rule

void RuleSpec::validate() const {
  if (triggers == 0 || nouns == 0) throw ConfigError("rule needs at least one trigger and one noun");
  if (triggers + nouns > vocab_size) throw ConfigError("rule vocabulary smaller than triggers + nouns");
  if (heldout_nouns >= nouns) throw ConfigError("rule must keep at least one noun out of the held-out set");
  if (!(p_low >= 0.0 && p_high <= 1.0 && p_low < p_high)) throw ConfigError("rule needs 0 <= p_low < p_high <= 1");
  if (min_len == 0 || min_len > max_len) throw ConfigError("rule needs 1 <= min_len <= max_len");
  if (!(trigger_weight >= 0.0 && noun_weight >= 0.0 && trigger_weight + noun_weight <= 1.0))
    throw ConfigError("rule sampling weights must be non-negative and sum to at most 1");
}

namespace {

const char* kConsonants = "bdfgklmnprstvz";
const char* kVowels = "aeiou";

std::string syllable(std::size_t k) {
  std::string s;
  s += kConsonants[k % 14];
  s += kVowels[(k / 14) % 5];
  return s;
}

std::string guest_word(std::size_t i) {
  std::string w = syllable(i % 70) + syllable((i * 11 + 5) % 70);
  for (std::size_t r = i / 70; r > 0; r /= 26) w += static_cast<char>('a' + r % 26);
  return w;
}

std::string host_word(std::size_t i) {
  return utf8_encode(static_cast<char32_t>(0x4E00 + i)) + utf8_encode(static_cast<char32_t>(0x6000 + (i * 7) % 2048));
}

const PlantedWord* find_word(const PlantedRule& rule, const std::string& surface) {
  for (const auto& w : rule.words)
    if (w.host == surface) return &w;
  return nullptr;
}

}  // namespace

bool PlantedRule::matches(const Sentence& x, std::size_t n) const {
  if (n == 0 || n >= x.size()) return false;
  const auto* cur = find_word(*this, x.tokens[n].surface);
  const auto* prev = find_word(*this, x.tokens[n - 1].surface);
  return cur && prev && cur->tag == "n" && prev->trigger;
}

TranslationLexicon PlantedRule::lexicon() const {
  TranslationLexicon lex;
  for (const auto& w : words) lex.set(w.host, w.guest);
  return lex;
}

TagSet PlantedRule::tagset() const { return TagSet({"n", "p", "v", "a", "d"}, {"n"}); }

PosLexicon PlantedRule::pos_lexicon() const {
  PosLexicon pos(tagset());
  for (const auto& w : words) pos.set(w.host, w.tag);
  return pos;
}

PlantedRule make_rule(const RuleSpec& spec) {
  spec.validate();
  PlantedRule rule;
  rule.spec = spec;
  const char* other_tags[] = {"v", "a", "d"};
  std::size_t noun_index = 0;
  for (std::size_t i = 0; i < spec.vocab_size; ++i) {
    PlantedWord w;
    w.host = host_word(i);
    w.guest = {guest_word(i)};
    if (i < spec.triggers) {
      w.tag = "p";
      w.trigger = true;
    } else if (i < spec.triggers + spec.nouns) {
      w.tag = "n";
      w.heldout = noun_index >= spec.nouns - spec.heldout_nouns;
      if (spec.multiword_every && noun_index % spec.multiword_every == spec.multiword_every - 1)
        w.guest.push_back(guest_word(i + spec.vocab_size));
      ++noun_index;
    } else {
      w.tag = other_tags[(i - spec.triggers - spec.nouns) % 3];
    }
    rule.words.push_back(std::move(w));
  }
  return rule;
}

SynthCorpus synth_corpus(const PlantedRule& rule, std::size_t n_sentences, std::uint64_t seed,
                         bool include_heldout) {
  if (n_sentences == 0) throw DomainError("synthetic corpus needs at least one sentence");
  const auto& spec = rule.spec;
  std::vector<std::size_t> classes[3];  // trigger, noun, other
  for (std::size_t i = 0; i < rule.words.size(); ++i) {
    const auto& w = rule.words[i];
    if (w.heldout && !include_heldout) continue;
    classes[w.trigger ? 0 : (w.tag == "n" ? 1 : 2)].push_back(i);
  }
  double weights[3] = {spec.trigger_weight, spec.noun_weight, 1.0 - spec.trigger_weight - spec.noun_weight};
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    if (classes[c].empty()) weights[c] = 0.0;
    total += weights[c];
  }
  if (!(total > 0.0)) throw ConfigError("rule sampling weights leave no word to draw");

  auto lex = rule.lexicon();
  nn::Rng rng(seed);
  SynthCorpus out;
  out.host.role = CorpusRole::HostMonolingual;
  out.cs.role = CorpusRole::CsTraining;
  for (std::size_t s = 0; s < n_sentences; ++s) {
    std::size_t len = spec.min_len + uniform_index(rng, spec.max_len - spec.min_len + 1);
    Sentence x;
    x.source_line = s + 1;
    std::vector<std::size_t> ids;
    for (std::size_t n = 0; n < len; ++n) {
      double u = uniform01(rng) * total;
      int c = 0;
      while (c < 2 && (weights[c] == 0.0 || u >= weights[c])) {
        u -= weights[c];
        ++c;
      }
      if (classes[c].empty()) c = classes[2].empty() ? (classes[1].empty() ? 0 : 1) : 2;
      std::size_t id = classes[c][uniform_index(rng, classes[c].size())];
      ids.push_back(id);
      x.tokens.push_back(Token{rule.words[id].host, Lang::Host, std::nullopt, 0});
    }
    SwitchMask mask;
    mask.bits.resize(len);
    for (std::size_t n = 0; n < len; ++n) {
      bool hit = n > 0 && rule.words[ids[n]].tag == "n" && rule.words[ids[n - 1]].trigger;
      mask.bits[n] = uniform01(rng) < (hit ? spec.p_high : spec.p_low);
    }
    Sentence y = realize(x, mask, lex);
    y.source_line = x.source_line;
    out.host.sentences.push_back(std::move(x));
    out.cs.sentences.push_back(std::move(y));
    out.masks.push_back(std::move(mask));
  }
  return out;
}

void write_masks(std::ostream& out, const std::vector<SwitchMask>& masks) {
  for (const auto& m : masks) {
    for (bool b : m.bits) out << (b ? '1' : '0');
    out << '\n';
  }
}

SynthCorpus only_switched(const SynthCorpus& s) {
  SynthCorpus out;
  out.host.role = s.host.role;
  out.cs.role = s.cs.role;
  for (std::size_t i = 0; i < s.cs.size(); ++i) {
    if (s.cs.sentences[i].guest_count() == 0) continue;
    out.host.sentences.push_back(s.host.sentences[i]);
    out.cs.sentences.push_back(s.cs.sentences[i]);
    out.masks.push_back(s.masks[i]);
  }
  return out;
}

SynthCorpus synth_switched(const PlantedRule& rule, std::size_t n, std::uint64_t seed, bool include_heldout) {
  SynthCorpus out;
  out.host.role = CorpusRole::HostMonolingual;
  out.cs.role = CorpusRole::CsTraining;
  for (std::uint64_t round = 0; out.cs.size() < n; ++round) {
    if (round == 64) throw DomainError("planted rule switches too rarely to collect switched sentences");
    auto part = only_switched(synth_corpus(rule, n, derive_seed(seed, "round" + std::to_string(round)), include_heldout));
    for (std::size_t i = 0; i < part.cs.size() && out.cs.size() < n; ++i) {
      out.host.sentences.push_back(std::move(part.host.sentences[i]));
      out.cs.sentences.push_back(std::move(part.cs.sentences[i]));
      out.masks.push_back(std::move(part.masks[i]));
    }
  }
  for (std::size_t i = 0; i < out.cs.size(); ++i) out.host.sentences[i].source_line = out.cs.sentences[i].source_line = i + 1;
  return out;
}

// ------------------------------------------------------------ augmentation

Augmentation augment(const Corpus& train_cs, const Corpus& hosts, const SentenceGenerator& generator,
                     const std::string& strategy, std::uint64_t seed, std::size_t per_sentence) {
  Augmentation a;
  a.strategy = strategy;
  a.seed = seed;
  a.corpus = train_cs;
  a.originals = train_cs.size();
  nn::Rng rng(seed);
  for (const auto& x : hosts.sentences) {
    for (std::size_t k = 0; k < per_sentence; ++k) {
      try {
        a.corpus.sentences.push_back(generator(x, rng));
      } catch (const RealizationError& e) {
        throw RealizationError(std::string(e.what()) + " (host sentence at line " + std::to_string(x.source_line) +
                               ")");
      }
      ++a.generated;
    }
  }
  return a;
}

void write_augment_report(std::ostream& out, const Augmentation& a) {
  out << "strategy\t" << a.strategy << '\n';
  out << "seed\t" << a.seed << '\n';
  out << "originals\t" << a.originals << '\n';
  out << "generated\t" << a.generated << '\n';
  out << "total\t" << a.corpus.size() << '\n';
}

SentenceGenerator baseline_generator(BaselineStrategy strategy, const TranslationLexicon& lex, const PosLexicon* pos) {
  return [strategy, &lex, pos](const Sentence& x, nn::Rng& rng) {
    return apply_baseline(strategy, x, lex, pos, rng).sentence;
  };
}

SentenceGenerator gan_generator(const GanModel& model, GenerateMode mode, const TranslationLexicon& lex,
                                const PosLexicon* pos, NoiseMode noise) {
  return [&model, mode, &lex, pos, noise](const Sentence& x, nn::Rng& rng) {
    return generate(model, x, mode, lex, pos, rng, noise).realized;
  };
}

// ------------------------------------------------------------ run config

namespace {

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + key + "' expects an unsigned integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

template <typename E>
E to_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, e] : options)
    if (v == name) return e;
  std::string expected;
  for (const auto& [name, e] : options) expected += (expected.empty() ? "" : "|") + std::string(name);
  throw ConfigError("'" + key + "' expects " + expected + ", got '" + v + "'");
}

template <typename E>
std::string from_enum(E e, std::initializer_list<std::pair<const char*, E>> options) {
  for (const auto& [name, o] : options)
    if (o == e) return name;
  return "?";
}

const std::initializer_list<std::pair<const char*, Pooling>> kPooling = {{"final", Pooling::FinalStates},
                                                                        {"mean", Pooling::Mean}};
const std::initializer_list<std::pair<const char*, DiscEncoder>> kDiscEncoder = {
    {"shared", DiscEncoder::Shared}, {"private", DiscEncoder::Private}};
const std::initializer_list<std::pair<const char*, NoiseMode>> kNoise = {{"sentence", NoiseMode::PerSentence},
                                                                        {"step", NoiseMode::PerStep}};
const std::initializer_list<std::pair<const char*, RewardForm>> kReward = {{"log", RewardForm::LogD},
                                                                          {"raw", RewardForm::RawD}};
const std::initializer_list<std::pair<const char*, GenerateMode>> kMode = {{"sample", GenerateMode::Sample},
                                                                          {"threshold", GenerateMode::Threshold}};

template <typename T>
struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const T&)> get;
  std::function<void(T&, const std::string&)> set;
  std::string full() const { return section.empty() ? key : section + "." + key; }
};

#define SIZE_FIELD(T, sec, name, expr)                                                                  \
  Field<T> {                                                                                           \
    sec, name, [](const T& c) { return std::to_string(c.expr); },                                       \
        [](T& c, const std::string& v) { c.expr = to_size(std::string(sec) + "." + name, v); }          \
  }
#define DOUBLE_FIELD(T, sec, name, expr)                                                                \
  Field<T> {                                                                                           \
    sec, name, [](const T& c) { return fmt_double(c.expr); },                                           \
        [](T& c, const std::string& v) { c.expr = to_double(std::string(sec) + "." + name, v); }        \
  }
#define STRING_FIELD(T, sec, name, expr)                                                  \
  Field<T> {                                                                             \
    sec, name, [](const T& c) { return c.expr; }, [](T& c, const std::string& v) { c.expr = v; } \
  }

std::vector<Field<RuleSpec>> rule_fields(const std::string& sec) {
  std::vector<Field<RuleSpec>> f = {
      SIZE_FIELD(RuleSpec, "", "vocab_size", vocab_size),
      SIZE_FIELD(RuleSpec, "", "nouns", nouns),
      SIZE_FIELD(RuleSpec, "", "triggers", triggers),
      SIZE_FIELD(RuleSpec, "", "heldout_nouns", heldout_nouns),
      DOUBLE_FIELD(RuleSpec, "", "trigger_weight", trigger_weight),
      DOUBLE_FIELD(RuleSpec, "", "noun_weight", noun_weight),
      DOUBLE_FIELD(RuleSpec, "", "p_high", p_high),
      DOUBLE_FIELD(RuleSpec, "", "p_low", p_low),
      SIZE_FIELD(RuleSpec, "", "min_len", min_len),
      SIZE_FIELD(RuleSpec, "", "max_len", max_len),
      SIZE_FIELD(RuleSpec, "", "multiword_every", multiword_every),
  };
  for (auto& x : f) x.section = sec;
  return f;
}

std::vector<Field<RunConfig>> run_fields() {
  using C = RunConfig;
  std::vector<Field<C>> f = {
      Field<C>{"", "seed", [](const C& c) { return std::to_string(c.seed); },
               [](C& c, const std::string& v) { c.seed = to_u64("seed", v); }},
      Field<C>{"", "exp", [](const C& c) { return std::to_string(c.experiment); },
               [](C& c, const std::string& v) {
                 auto n = to_size("exp", v);
                 if (n < 1 || n > 3) throw ConfigError("'exp' must be 1, 2 or 3");
                 c.experiment = static_cast<int>(n);
               }},
      STRING_FIELD(C, "paths", "output_dir", paths.output_dir),
      STRING_FIELD(C, "paths", "cs_train", paths.cs_train),
      STRING_FIELD(C, "paths", "host_train", paths.host_train),
      STRING_FIELD(C, "paths", "test_cs", paths.test_cs),
      STRING_FIELD(C, "paths", "test_host", paths.test_host),
      STRING_FIELD(C, "paths", "dev", paths.dev),
      STRING_FIELD(C, "paths", "lexicon", paths.lexicon),
      STRING_FIELD(C, "paths", "pos_lexicon", paths.pos_lexicon),
      STRING_FIELD(C, "paths", "tagset", paths.tagset),
  };
  for (auto& rf : rule_fields("synth")) {
    f.push_back(Field<C>{rf.section, rf.key, [g = rf.get](const C& c) { return g(c.rule); },
                         [s = rf.set](C& c, const std::string& v) { s(c.rule, v); }});
  }
  std::vector<Field<C>> rest = {
      SIZE_FIELD(C, "synth", "n_cs_train", n_cs_train),
      SIZE_FIELD(C, "synth", "n_host_train", n_host_train),
      SIZE_FIELD(C, "synth", "n_test", n_test),
      SIZE_FIELD(C, "synth", "n_dev", n_dev),
      SIZE_FIELD(C, "gan", "word_dim", arch.word_dim),
      SIZE_FIELD(C, "gan", "pos_dim", arch.pos_dim),
      SIZE_FIELD(C, "gan", "hidden", arch.hidden),
      SIZE_FIELD(C, "gan", "noise_dim", arch.noise_dim),
      DOUBLE_FIELD(C, "gan", "d_dropout", arch.d_dropout),
      Field<C>{"gan", "pooling", [](const C& c) { return from_enum(c.arch.pooling, kPooling); },
               [](C& c, const std::string& v) { c.arch.pooling = to_enum("gan.pooling", v, kPooling); }},
      Field<C>{"gan", "disc_encoder", [](const C& c) { return from_enum(c.arch.disc_encoder, kDiscEncoder); },
               [](C& c, const std::string& v) { c.arch.disc_encoder = to_enum("gan.disc_encoder", v, kDiscEncoder); }},
      SIZE_FIELD(C, "gan", "epochs", train.epochs),
      SIZE_FIELD(C, "gan", "batch_size", train.batch_size),
      SIZE_FIELD(C, "gan", "d_steps", train.d_steps),
      SIZE_FIELD(C, "gan", "g_steps", train.g_steps),
      DOUBLE_FIELD(C, "gan", "g_step_size", train.g_step_size),
      DOUBLE_FIELD(C, "gan", "d_step_size", train.d_step_size),
      Field<C>{"gan", "noise", [](const C& c) { return from_enum(c.train.noise, kNoise); },
               [](C& c, const std::string& v) { c.train.noise = to_enum("gan.noise", v, kNoise); }},
      Field<C>{"gan", "reward", [](const C& c) { return from_enum(c.train.reward, kReward); },
               [](C& c, const std::string& v) { c.train.reward = to_enum("gan.reward", v, kReward); }},
      DOUBLE_FIELD(C, "gan", "baseline_decay", train.baseline_decay),
      DOUBLE_FIELD(C, "gan", "clip_norm", train.clip_norm),
      SIZE_FIELD(C, "gan", "vocab_max", vocab_max),
      SIZE_FIELD(C, "charlm", "hidden", charlm.hidden),
      SIZE_FIELD(C, "charlm", "embed_dim", charlm.embed_dim),
      DOUBLE_FIELD(C, "charlm", "dropout", charlm.dropout),
      DOUBLE_FIELD(C, "charlm", "step_size", charlm.step_size),
      DOUBLE_FIELD(C, "charlm", "clip_norm", charlm.clip_norm),
      SIZE_FIELD(C, "charlm", "epochs", charlm.epochs),
      SIZE_FIELD(C, "charlm", "batch_size", charlm.batch_size),
      SIZE_FIELD(C, "charlm", "patience", charlm.patience),
      Field<C>{"baselines", "random_p",
               [](const C& c) { return c.random_p ? fmt_double(*c.random_p) : std::string("cs-rate"); },
               [](C& c, const std::string& v) {
                 if (v == "cs-rate") {
                   c.random_p.reset();
                 } else {
                   c.random_p = to_double("baselines.random_p", v);
                 }
               }},
      Field<C>{"experiment", "text_mode", [](const C& c) { return from_enum(c.text_mode, kMode); },
               [](C& c, const std::string& v) { c.text_mode = to_enum("experiment.text_mode", v, kMode); }},
      Field<C>{"experiment", "exp2_lm_text", [](const C& c) { return std::string(c.exp2_lm_with_host ? "cs+host" : "cs"); },
               [](C& c, const std::string& v) {
                 c.exp2_lm_with_host = to_enum<bool>("experiment.exp2_lm_text", v, {{"cs", false}, {"cs+host", true}});
               }},
      SIZE_FIELD(C, "experiment", "augment_per_sentence", augment_per_sentence),
      SIZE_FIELD(C, "experiment", "augment_limit", augment_limit),
      Field<C>{"experiment", "exp3_methods",
               [](const C& c) {
                 std::string s;
                 for (const auto& m : c.exp3_methods) s += (s.empty() ? "" : ",") + m;
                 return s;
               },
               [](C& c, const std::string& v) {
                 c.exp3_methods.clear();
                 std::stringstream ss(v);
                 std::string item;
                 while (std::getline(ss, item, ',')) {
                   if (item.empty()) continue;
                   if (item != "random" && item != "noun" && item != "proposed" && item != "proposed_pos")
                     throw ConfigError("unknown exp3 method '" + item + "'");
                   c.exp3_methods.push_back(item);
                 }
               }},
  };
  f.insert(f.end(), rest.begin(), rest.end());
  return f;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef STRING_FIELD

template <typename T>
void apply_ini(std::istream& in, const std::vector<Field<T>>& fields, T& target) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ParseError(e.message(), e.line());
  }
  std::map<std::string, const Field<T>*> index;
  for (const auto& f : fields) index.emplace(f.full(), &f);
  auto assign = [&](const std::string& full, const std::string& value) {
    auto it = index.find(full);
    if (it == index.end()) throw ConfigError("unknown configuration key '" + full + "'");
    it->second->set(target, value);
  };
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      assign(name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) assign(name + "." + key, leaf.data());
  }
}

template <typename T>
void emit_ini(std::ostream& out, const std::vector<Field<T>>& fields, const T& source) {
  // group by section (first-appearance order) so a section header never repeats
  std::vector<std::string> order;
  for (const auto& f : fields)
    if (std::find(order.begin(), order.end(), f.section) == order.end()) order.push_back(f.section);
  bool first = true;
  for (const auto& section : order) {
    if (!section.empty()) {
      out << (first ? "" : "\n") << '[' << section << "]\n";
    }
    first = false;
    for (const auto& f : fields)
      if (f.section == section) out << f.key << " = " << f.get(source) << '\n';
  }
}

}  // namespace

RuleSpec load_rule_spec(std::istream& in) {
  RuleSpec spec;
  apply_ini(in, rule_fields("rule"), spec);
  spec.validate();
  return spec;
}

RuleSpec load_rule_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rule file '" + path + "'");
  return load_rule_spec(in);
}

void write_rule_spec(std::ostream& out, const RuleSpec& spec) { emit_ini(out, rule_fields("rule"), spec); }

RunConfig parse_run_config(std::istream& in) {
  RunConfig cfg;
  apply_ini(in, run_fields(), cfg);
  cfg.rule.validate();
  cfg.train.validate();
  if (cfg.random_p && !(*cfg.random_p >= 0.0 && *cfg.random_p <= 1.0))
    throw ConfigError("baselines.random_p must lie in [0, 1]");
  if (cfg.augment_per_sentence == 0) throw ConfigError("experiment.augment_per_sentence must be positive");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_run_config(in);
}

void write_run_config(std::ostream& out, const RunConfig& cfg) { emit_ini(out, run_fields(), cfg); }

void validate_paths(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> inputs = {
      {"cs_train", cfg.paths.cs_train}, {"host_train", cfg.paths.host_train}, {"test_cs", cfg.paths.test_cs},
      {"test_host", cfg.paths.test_host}, {"dev", cfg.paths.dev}, {"lexicon", cfg.paths.lexicon},
      {"pos_lexicon", cfg.paths.pos_lexicon}, {"tagset", cfg.paths.tagset}};
  std::string missing;
  for (const auto& [key, path] : inputs)
    if (!path.empty() && !fs::exists(path)) missing += " paths." + key + "=" + path;
  if (!missing.empty()) throw ConfigError("missing input files:" + missing);
  if (!cfg.synthetic()) {
    std::string absent;
    for (const auto& [key, path] : inputs) {
      bool required = key == "host_train" || key == "test_cs" || key == "test_host" || key == "lexicon";
      if (required && path.empty()) absent += " paths." + key;
    }
    if (!absent.empty()) throw ConfigError("file-based runs also need:" + absent);
    if (!cfg.paths.pos_lexicon.empty() && cfg.paths.tagset.empty())
      throw ConfigError("paths.pos_lexicon requires paths.tagset");
  }
}

void Manifest::add_config(const RunConfig& cfg) {
  for (const auto& f : run_fields()) add("config." + f.full(), f.get(cfg));
}

void Manifest::write(std::ostream& out) const {
  for (const auto& [k, v] : entries) out << k << '\t' << v << '\n';
}

void Manifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest '" + path + "'");
  write(out);
}

// ------------------------------------------------------------ experiments

ExperimentData load_experiment_data(const RunConfig& cfg) {
  validate_paths(cfg);
  ExperimentData d;
  if (cfg.synthetic()) {
    auto rule = make_rule(cfg.rule);
    d.cs_train = synth_switched(rule, cfg.n_cs_train, derive_seed(cfg.seed, "synth.cs_train"), false).cs;
    d.host_train = synth_corpus(rule, cfg.n_host_train, derive_seed(cfg.seed, "synth.host_train"), false).host;
    auto test = synth_switched(rule, cfg.n_test, derive_seed(cfg.seed, "synth.test"), true);
    d.test_cs = std::move(test.cs);
    d.test_host = std::move(test.host);
    d.dev = synth_switched(rule, cfg.n_dev, derive_seed(cfg.seed, "synth.dev"), true).cs;
    d.lex = rule.lexicon();
    d.pos = rule.pos_lexicon();
  } else {
    d.cs_train = parse_corpus_file(cfg.paths.cs_train).corpus;
    d.host_train = parse_corpus_file(cfg.paths.host_train, {}, CorpusRole::HostMonolingual).corpus;
    d.test_cs = parse_corpus_file(cfg.paths.test_cs, {}, CorpusRole::Test).corpus;
    d.test_host = parse_corpus_file(cfg.paths.test_host, {}, CorpusRole::HostMonolingual).corpus;
    if (!cfg.paths.dev.empty()) d.dev = parse_corpus_file(cfg.paths.dev, {}, CorpusRole::Dev).corpus;
    d.lex = load_lexicon_file(cfg.paths.lexicon).lexicon;
    if (!cfg.paths.pos_lexicon.empty())
      d.pos = load_pos_lexicon_file(cfg.paths.pos_lexicon, load_tagset_file(cfg.paths.tagset));
    if (d.test_cs.size() != d.test_host.size())
      throw AlignmentError("test_cs and test_host differ in sentence count");
  }
  d.dev.role = CorpusRole::Dev;
  d.test_cs.role = CorpusRole::Test;
  return d;
}

TrainedGan train_proposed(const ExperimentData& data, const RunConfig& cfg, bool use_pos) {
  const PosLexicon* pos = data.pos ? &*data.pos : nullptr;
  if (use_pos && !pos) throw ConfigError("the POS-conditioned generator needs a POS lexicon");
  GanArch arch = cfg.arch;
  arch.use_pos = use_pos;
  TagSet tags = pos ? pos->tags() : TagSet();
  GanModel model(build_gan_vocab(data.cs_train, data.host_train, data.lex, cfg.vocab_max), tags, arch,
                 derive_seed(cfg.seed, "gan.init"));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "gan.train");
  auto history = train(model, data.cs_train, data.host_train, data.lex, pos, tc);
  return TrainedGan{std::move(model), std::move(history)};
}

const TrainedGan& ProposedCache::get(bool use_pos) {
  auto& slot = use_pos ? pos_ : plain_;
  if (!slot) slot = train_proposed(data_, cfg_, use_pos);
  return *slot;
}

namespace {

constexpr const char* kNoPos = "no POS lexicon";

double random_p(const ExperimentData& data, const RunConfig& cfg) {
  return cfg.random_p ? *cfg.random_p : cs_rate(data.cs_train);
}

std::vector<Sentence> generate_all(const SentenceGenerator& gen, const Corpus& hosts, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::vector<Sentence> out;
  out.reserve(hosts.size());
  for (const auto& x : hosts.sentences) out.push_back(gen(x, rng));
  return out;
}

// Generator for a table method, or nullopt with a skip reason.
std::optional<SentenceGenerator> method_generator(const std::string& method, const ExperimentData& data,
                                                  const RunConfig& cfg, ProposedCache& models, GenerateMode mode,
                                                  std::string& skip) {
  const PosLexicon* pos = data.pos ? &*data.pos : nullptr;
  if ((method == "noun" || method == "proposed_pos") && !pos) {
    skip = kNoPos;
    return std::nullopt;
  }
  if (method == "zh" || method == "en" || method == "noun")
    return baseline_generator(BaselineStrategy::parse(method), data.lex, pos);
  if (method == "random") return baseline_generator(BaselineStrategy::parse("random", random_p(data, cfg)), data.lex, pos);
  bool use_pos = method == "proposed_pos";
  return gan_generator(models.get(use_pos).model, mode, data.lex, pos, cfg.train.noise);
}

CharLmConfig charlm_config(const RunConfig& cfg) {
  CharLmConfig c = cfg.charlm;
  c.seed = derive_seed(cfg.seed, "charlm");
  return c;
}

}  // namespace

std::vector<Exp1Row> run_exp1(const ExperimentData& data, const RunConfig& cfg, ProposedCache& models) {
  std::vector<Exp1Row> rows;
  for (const char* method : {"zh", "en", "random", "noun", "proposed", "proposed_pos"}) {
    Exp1Row row;
    row.method = method;
    auto gen = method_generator(method, data, cfg, models, GenerateMode::Threshold, row.skip_reason);
    if (gen) {
      auto hyps = generate_all(*gen, data.test_host, derive_seed(cfg.seed, std::string("exp1.") + method));
      row.report = evaluate(data.test_cs.sentences, hyps);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<PplRow> run_exp2(const ExperimentData& data, const RunConfig& cfg, ProposedCache& models) {
  Corpus lm_text = data.cs_train;
  if (cfg.exp2_lm_with_host)
    lm_text.sentences.insert(lm_text.sentences.end(), data.host_train.sentences.begin(),
                             data.host_train.sentences.end());
  auto kn = train_kn(lm_text);
  auto charlm = train_char_lstm(lm_text, data.dev.size() ? &data.dev : nullptr, charlm_config(cfg));

  std::vector<PplRow> rows;
  for (const char* method : {"random", "noun", "proposed", "proposed_pos"}) {
    PplRow row;
    row.method = method;
    auto gen = method_generator(method, data, cfg, models, cfg.text_mode, row.skip_reason);
    if (gen) {
      Corpus text;
      text.sentences = generate_all(*gen, data.test_host, derive_seed(cfg.seed, std::string("exp2.") + method));
      row.ngram = ngram_ppl(kn, text).ppl();
      row.rnnlm = char_lstm_ppl(charlm.model, text).ppl();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<Exp3Column> run_exp3(const ExperimentData& data, const RunConfig& cfg, ProposedCache& models) {
  Corpus hosts = data.host_train;
  if (cfg.augment_limit && hosts.size() > cfg.augment_limit) hosts.sentences.resize(cfg.augment_limit);
  const Corpus* dev = data.dev.size() ? &data.dev : nullptr;

  auto score = [&](const Corpus& train_text, Exp3Column& col) {
    auto lm = train_char_lstm(train_text, dev, charlm_config(cfg));
    if (dev) col.dev = char_lstm_ppl(lm.model, *dev).ppl();
    col.test = char_lstm_ppl(lm.model, data.test_cs).ppl();
  };

  std::vector<Exp3Column> cols;
  Exp3Column base;
  base.method = "train";
  score(data.cs_train, base);
  cols.push_back(std::move(base));
  for (const auto& method : cfg.exp3_methods) {
    Exp3Column col;
    col.method = method;
    auto gen = method_generator(method, data, cfg, models, cfg.text_mode, col.skip_reason);
    if (gen) {
      auto seed = derive_seed(cfg.seed, "exp3." + method);
      auto a = augment(data.cs_train, hosts, *gen, method, seed, cfg.augment_per_sentence);
      score(a.corpus, col);
    }
    cols.push_back(std::move(col));
  }
  return cols;
}

namespace {

std::string opt_fixed(const std::optional<double>& v) { return v ? fmt_fixed(*v, 4) : std::string("undefined"); }

}  // namespace

void write_exp1_table(std::ostream& out, const std::vector<Exp1Row>& rows) {
  write_metric_header(out);
  for (const auto& r : rows) {
    if (r.report) {
      write_metric_row(out, r.method, *r.report);
    } else {
      out << r.method;
      for (int i = 0; i < 7; ++i) out << ",skipped";
      out << '\n';
    }
  }
}

void write_exp2_table(std::ostream& out, const std::vector<PplRow>& rows) {
  out << "method,ngram_ppl,rnnlm_ppl\n";
  for (const auto& r : rows) {
    if (r.skip_reason.empty()) {
      out << r.method << ',' << opt_fixed(r.ngram) << ',' << opt_fixed(r.rnnlm) << '\n';
    } else {
      out << r.method << ",skipped,skipped\n";
    }
  }
}

void write_exp3_table(std::ostream& out, const std::vector<Exp3Column>& columns) {
  out << "split";
  for (const auto& c : columns) out << ',' << c.method;
  out << '\n';
  for (const char* split : {"dev", "test"}) {
    out << split;
    for (const auto& c : columns) {
      if (!c.skip_reason.empty()) {
        out << ",skipped";
      } else {
        out << ',' << opt_fixed(std::string(split) == "dev" ? c.dev : c.test);
      }
    }
    out << '\n';
  }
}

std::vector<std::string> run_experiment(int exp, const RunConfig& cfg, const std::string& command_line) {
  if (exp < 1 || exp > 3) throw ConfigError("experiment must be 1, 2 or 3");
  auto data = load_experiment_data(cfg);
  fs::create_directories(cfg.paths.output_dir);
  auto path = [&](const std::string& name) { return (fs::path(cfg.paths.output_dir) / name).string(); };
  const std::string tag = "exp" + std::to_string(exp);

  ProposedCache models(data, cfg);
  std::vector<std::string> written;
  std::vector<std::pair<std::string, std::string>> skips;
  auto open = [&](const std::string& name) {
    std::ofstream out(path(name));
    if (!out) throw ConfigError("cannot write '" + path(name) + "'");
    written.push_back(path(name));
    return out;
  };

  {
    auto out = open(tag + "_table.csv");
    if (exp == 1) {
      auto rows = run_exp1(data, cfg, models);
      for (const auto& r : rows)
        if (!r.report) skips.emplace_back(r.method, r.skip_reason);
      write_exp1_table(out, rows);
    } else if (exp == 2) {
      auto rows = run_exp2(data, cfg, models);
      for (const auto& r : rows)
        if (!r.skip_reason.empty()) skips.emplace_back(r.method, r.skip_reason);
      write_exp2_table(out, rows);
    } else {
      auto cols = run_exp3(data, cfg, models);
      for (const auto& c : cols)
        if (!c.skip_reason.empty()) skips.emplace_back(c.method, c.skip_reason);
      write_exp3_table(out, cols);
    }
  }
  for (bool use_pos : {false, true}) {
    // history files only for generators the run actually trained
    std::string name = tag + (use_pos ? "_gan_pos_history.csv" : "_gan_plain_history.csv");
    bool needed = exp != 3 ? (!use_pos || data.pos)
                           : std::find(cfg.exp3_methods.begin(), cfg.exp3_methods.end(),
                                       use_pos ? "proposed_pos" : "proposed") != cfg.exp3_methods.end();
    if (!needed || (use_pos && !data.pos)) continue;
    auto out = open(name);
    write_history_csv(out, models.get(use_pos).history);
  }
  {
    auto out = open(tag + "_config.ini");
    write_run_config(out, cfg);
  }

  Manifest m;
  m.add("command", command_line);
  m.add("version", kVersion);
  m.add("experiment", std::to_string(exp));
  m.add("seed", std::to_string(cfg.seed));
  m.add("data", cfg.synthetic() ? "synthetic" : "files");
  for (const char* label : {"synth.cs_train", "synth.host_train", "synth.test", "synth.dev", "gan.init", "gan.train",
                            "charlm"})
    m.add(std::string("seed.") + label, std::to_string(derive_seed(cfg.seed, label)));
  m.add("sizes.cs_train", std::to_string(data.cs_train.size()));
  m.add("sizes.host_train", std::to_string(data.host_train.size()));
  m.add("sizes.test", std::to_string(data.test_cs.size()));
  m.add("sizes.dev", std::to_string(data.dev.size()));
  for (const auto& [method, why] : skips) m.add("skipped." + method, why);
  for (const auto& w : written) m.add("output", w);
  m.add_config(cfg);
  auto manifest_path = path(tag + "_manifest.txt");
  m.save(manifest_path);
  written.push_back(manifest_path);
  return written;
}

}  // namespace csgan
