#include "csgan/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "csgan/error.hpp"

namespace csgan {

double PerplexityReport::ppl() const {
  if (count == 0) throw DomainError("perplexity over zero scored units");
  return std::exp(-log_likelihood / static_cast<double>(count));
}

void write_ppl_text(std::ostream& out, const PerplexityReport& r) {
  char buf[64];
  out << "sentences\t" << r.sentences << '\n';
  out << "units\t" << r.count << '\n';
  out << "oov\t" << r.oov << '\n';
  std::snprintf(buf, sizeof buf, "%.6f", r.log_likelihood);
  out << "log_likelihood\t" << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.4f", r.ppl());
  out << "ppl\t" << buf << '\n';
}

// ------------------------------------------------------------ KN trigram

namespace {

constexpr std::size_t kIdLimit = std::size_t{1} << 21;
constexpr const char* kKnHeader = "csgan-kn 1";

std::vector<std::int32_t> padded_ids(const Vocabulary& vocab, const Sentence& s, std::size_t* oov) {
  std::vector<std::int32_t> ids = {Vocabulary::kBos, Vocabulary::kBos};
  for (const auto& t : s.tokens) {
    auto id = vocab.id(t.surface);
    if (id == Vocabulary::kUnk && oov) ++*oov;
    ids.push_back(id);
  }
  ids.push_back(Vocabulary::kEos);
  return ids;
}

// n1 / (n1 + 2 n2) over a multiset of counts; nullopt when either is absent.
template <typename Map>
std::optional<double> discount_from(const Map& counts) {
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  for (const auto& [k, c] : counts) {
    n1 += c == 1;
    n2 += c == 2;
  }
  if (n1 == 0 || n2 == 0) return std::nullopt;
  return static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2);
}

}  // namespace

void KnTrigram::add_sentence(const Sentence& s) {
  if (vocab_.size() >= kIdLimit) throw DomainError("vocabulary too large for trigram keys");
  auto ids = padded_ids(vocab_, s, nullptr);
  for (std::size_t i = 2; i < ids.size(); ++i) ++trigrams_[key(ids[i - 2], ids[i - 1], ids[i])];
  finalized_ = false;
}

void KnTrigram::finalize() {
  tri_ctx_.clear();
  bi_cont_.clear();
  bi_ctx_.clear();
  uni_cont_.clear();
  constexpr std::uint64_t mask = kIdLimit - 1;
  for (const auto& [k, c] : trigrams_) {
    auto u = static_cast<std::int32_t>(k >> 42);
    auto v = static_cast<std::int32_t>((k >> 21) & mask);
    auto w = static_cast<std::int32_t>(k & mask);
    auto& ctx = tri_ctx_[key(u, v)];
    ctx.total += c;
    ctx.types += 1;
    ++bi_cont_[key(v, w)];
  }
  for (const auto& [k, n] : bi_cont_) {
    auto v = static_cast<std::int32_t>(k >> 32);
    auto w = static_cast<std::int32_t>(k & 0xffffffffu);
    auto& ctx = bi_ctx_[v];
    ctx.total += n;
    ctx.types += 1;
    ++uni_cont_[w];
  }
  uni_total_ = bi_cont_.size();
  uni_types_ = uni_cont_.size();

  fallback_orders_.clear();
  auto assign = [&](int order, std::optional<double> d) {
    discounts_[static_cast<std::size_t>(order - 1)] = d.value_or(kFallbackDiscount);
    if (!d) fallback_orders_.push_back(order);
  };
  assign(1, discount_from(uni_cont_));
  assign(2, discount_from(bi_cont_));
  assign(3, discount_from(trigrams_));
  finalized_ = true;
}

double KnTrigram::unigram_prob(std::int32_t w) const {
  if (!finalized_) throw LifecycleError("trigram model queried before finalize()");
  if (w == Vocabulary::kBos || w < 0 || static_cast<std::size_t>(w) >= vocab_.size()) return 0.0;
  const double uniform = 1.0 / static_cast<double>(predictable_size());
  if (uni_total_ == 0) return uniform;
  const double d = discounts_[0];
  auto it = uni_cont_.find(w);
  double c = it == uni_cont_.end() ? 0.0 : static_cast<double>(it->second);
  double n = static_cast<double>(uni_total_);
  return (std::max(c - d, 0.0) + d * static_cast<double>(uni_types_) * uniform) / n;
}

double KnTrigram::bigram_prob(std::int32_t w, std::int32_t v) const {
  double lower = unigram_prob(w);
  auto ctx = bi_ctx_.find(v);
  if (ctx == bi_ctx_.end()) return lower;
  const double d = discounts_[1];
  auto it = bi_cont_.find(key(v, w));
  double c = it == bi_cont_.end() ? 0.0 : static_cast<double>(it->second);
  double n = static_cast<double>(ctx->second.total);
  return std::max(c - d, 0.0) / n + d * static_cast<double>(ctx->second.types) / n * lower;
}

double KnTrigram::prob(std::int32_t w, std::int32_t u, std::int32_t v) const {
  double lower = bigram_prob(w, v);
  auto ctx = tri_ctx_.find(key(u, v));
  if (ctx == tri_ctx_.end()) return lower;
  const double d = discounts_[2];
  auto it = trigrams_.find(key(u, v, w));
  double c = it == trigrams_.end() ? 0.0 : static_cast<double>(it->second);
  double n = static_cast<double>(ctx->second.total);
  return std::max(c - d, 0.0) / n + d * static_cast<double>(ctx->second.types) / n * lower;
}

std::size_t KnTrigram::trigram_count(std::int32_t u, std::int32_t v, std::int32_t w) const {
  auto it = trigrams_.find(key(u, v, w));
  return it == trigrams_.end() ? 0 : it->second;
}

void KnTrigram::write(std::ostream& out) const {
  out << kKnHeader << '\n';
  char buf[96];
  std::snprintf(buf, sizeof buf, "discounts %.17g %.17g %.17g", discounts_[0], discounts_[1], discounts_[2]);
  out << buf << '\n';
  out << "vocab " << vocab_.size() << '\n';
  for (const auto& s : vocab_.surfaces()) out << s << '\n';
  std::map<std::uint64_t, std::size_t> sorted(trigrams_.begin(), trigrams_.end());
  out << "trigrams " << sorted.size() << '\n';
  constexpr std::uint64_t mask = kIdLimit - 1;
  for (const auto& [k, c] : sorted)
    out << (k >> 42) << ' ' << ((k >> 21) & mask) << ' ' << (k & mask) << ' ' << c << '\n';
  out << "end\n";
}

KnTrigram KnTrigram::read(std::istream& in) {
  std::size_t line_no = 0;
  std::string line;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError("unexpected end of count table", line_no + 1);
    ++line_no;
    return line;
  };
  if (next() != kKnHeader) throw ParseError("not a trigram count table", line_no);
  next();  // discounts are recomputed from the counts
  std::size_t n = 0;
  {
    std::istringstream h(next());
    std::string tag;
    if (!(h >> tag >> n) || tag != "vocab") throw ParseError("expected vocab header", line_no);
  }
  std::vector<std::string> surfaces;
  for (std::size_t i = 0; i < n; ++i) surfaces.push_back(next());
  KnTrigram model{Vocabulary(surfaces)};
  if (model.vocab_.size() != n) throw ParseError("vocabulary lacks reserved entries or repeats a word", line_no);
  std::size_t m = 0;
  {
    std::istringstream h(next());
    std::string tag;
    if (!(h >> tag >> m) || tag != "trigrams") throw ParseError("expected trigrams header", line_no);
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::istringstream r(next());
    std::int64_t u, v, w;
    std::size_t c;
    if (!(r >> u >> v >> w >> c)) throw ParseError("malformed trigram record", line_no);
    auto bad = [&](std::int64_t id) { return id < 0 || static_cast<std::size_t>(id) >= n; };
    if (bad(u) || bad(v) || bad(w) || c == 0) throw ParseError("trigram record out of range", line_no);
    model.trigrams_[key(static_cast<std::int32_t>(u), static_cast<std::int32_t>(v), static_cast<std::int32_t>(w))] =
        c;
  }
  if (next() != "end") throw ParseError("missing end marker", line_no);
  model.finalize();
  return model;
}

KnTrigram train_kn(const Corpus& corpus, std::optional<Vocabulary> vocab) {
  if (corpus.sentences.empty()) throw DomainError("cannot train a trigram model on an empty corpus");
  KnTrigram model(vocab ? std::move(*vocab) : build_vocab(corpus, std::numeric_limits<std::size_t>::max()));
  for (const auto& s : corpus.sentences) model.add_sentence(s);
  model.finalize();
  return model;
}

PerplexityReport ngram_ppl(const KnTrigram& model, const Corpus& corpus) {
  PerplexityReport r;
  for (const auto& s : corpus.sentences) {
    auto ids = padded_ids(model.vocab(), s, &r.oov);
    for (std::size_t i = 2; i < ids.size(); ++i) {
      double p = model.prob(ids[i], ids[i - 2], ids[i - 1]);
      if (!(p > 0.0)) throw NumericError("zero trigram probability for '" + model.vocab().surface(ids[i]) + "'");
      r.log_likelihood += std::log(p);
    }
    r.count += ids.size() - 2;
    ++r.sentences;
  }
  return r;
}

// ------------------------------------------------------------ Char LSTM

CharInventory::CharInventory() = default;

CharInventory::CharInventory(const std::vector<char32_t>& chars) {
  std::set<char32_t> unique(chars.begin(), chars.end());
  unique.erase(U' ');
  chars_.assign(unique.begin(), unique.end());
  for (std::size_t i = 0; i < chars_.size(); ++i) index_.emplace(chars_[i], static_cast<std::int32_t>(i + 4));
}

CharInventory CharInventory::from_corpus(const Corpus& corpus) {
  std::vector<char32_t> chars;
  for (const auto& s : corpus.sentences)
    for (const auto& t : s.tokens) {
      auto cps = utf8_decode(t.surface);
      chars.insert(chars.end(), cps.begin(), cps.end());
    }
  return CharInventory(chars);
}

std::int32_t CharInventory::id(char32_t c) const {
  if (c == U' ') return kSpace;
  auto it = index_.find(c);
  return it == index_.end() ? kUnk : it->second;
}

std::size_t CharInventory::encode(const Sentence& s, std::vector<std::int32_t>& inputs,
                                  std::vector<std::int32_t>& targets) const {
  inputs.assign(1, kBos);
  targets.clear();
  std::size_t unknown = 0;
  for (std::size_t n = 0; n < s.tokens.size(); ++n) {
    if (n > 0) targets.push_back(kSpace);
    for (char32_t c : utf8_decode(s.tokens[n].surface)) {
      auto i = id(c);
      unknown += i == kUnk;
      targets.push_back(i);
    }
  }
  targets.push_back(kEos);
  inputs.insert(inputs.end(), targets.begin(), targets.end() - 1);
  return unknown;
}

namespace {

void validate(const CharLmConfig& c) {
  if (c.hidden == 0) throw ConfigError("char LM hidden size must be positive");
  if (c.batch_size == 0) throw ConfigError("char LM batch size must be positive");
  if (c.epochs == 0) throw ConfigError("char LM epochs must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("char LM dropout must lie in [0, 1)");
  if (!(c.step_size > 0.0)) throw ConfigError("char LM step size must be positive");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

CharLstmModel::CharLstmModel(CharInventory inventory, const CharLmConfig& config)
    : inventory_(std::move(inventory)), config_(config) {
  validate(config_);
  auto h = static_cast<Eigen::Index>(config_.hidden);
  auto e = static_cast<Eigen::Index>(config_.embed_dim ? config_.embed_dim : config_.hidden);
  auto v = static_cast<Eigen::Index>(inventory_.size());
  embedding_ = nn::add_embedding(params_, "char.emb", v, e);
  layer1_ = nn::add_lstm(params_, "char.lstm1", e, h);
  layer2_ = nn::add_lstm(params_, "char.lstm2", h, h);
  output_ = nn::add_dense(params_, "char.out", h, v);
  params_.initialize(config_.seed);
}

nn::NodeId CharLstmModel::logits_graph(nn::Tape& tape, const std::vector<std::int32_t>& inputs, nn::Mode mode,
                                       nn::Rng& rng) const {
  auto x = nn::embed(tape, embedding_, inputs);
  auto h1 = nn::lstm(tape, layer1_, x);
  auto between = nn::dropout(tape, h1, config_.dropout, rng, mode);
  auto h2 = nn::lstm(tape, layer2_, between);
  return nn::dense(tape, output_, h2);
}

nn::Matrix CharLstmModel::distributions(const Sentence& s) const {
  std::vector<std::int32_t> inputs, targets;
  inventory_.encode(s, inputs, targets);
  nn::Tape tape(params_, false);
  nn::Rng rng(0);
  return nn::softmax_rows(tape.value(logits_graph(tape, inputs, nn::Mode::Eval, rng)));
}

nn::Container CharLstmModel::to_container() const {
  nn::Container c;
  c.meta["kind"] = "char-lstm";
  c.meta["hidden"] = std::to_string(config_.hidden);
  c.meta["embed_dim"] = std::to_string(config_.embed_dim);
  c.meta["dropout"] = fmt(config_.dropout);
  c.meta["step_size"] = fmt(config_.step_size);
  c.meta["clip_norm"] = fmt(config_.clip_norm);
  c.meta["epochs"] = std::to_string(config_.epochs);
  c.meta["batch_size"] = std::to_string(config_.batch_size);
  c.meta["patience"] = std::to_string(config_.patience);
  c.meta["seed"] = std::to_string(config_.seed);
  auto& chars = c.lists["chars"];
  for (char32_t ch : inventory_.chars()) chars.push_back(utf8_encode(ch));
  c.put_params(params_);
  return c;
}

CharLstmModel CharLstmModel::from_container(const nn::Container& c) {
  if (c.require_meta("kind") != "char-lstm") throw ParseError("container does not hold a character LM", 0);
  CharLmConfig cfg;
  try {
    cfg.hidden = std::stoul(c.require_meta("hidden"));
    cfg.embed_dim = std::stoul(c.require_meta("embed_dim"));
    cfg.dropout = std::stod(c.require_meta("dropout"));
    cfg.step_size = std::stod(c.require_meta("step_size"));
    cfg.clip_norm = std::stod(c.require_meta("clip_norm"));
    cfg.epochs = std::stoul(c.require_meta("epochs"));
    cfg.batch_size = std::stoul(c.require_meta("batch_size"));
    cfg.patience = std::stoul(c.require_meta("patience"));
    cfg.seed = std::stoull(c.require_meta("seed"));
  } catch (const std::logic_error&) {
    throw ParseError("malformed character LM metadata", 0);
  }
  std::vector<char32_t> chars;
  auto it = c.lists.find("chars");
  if (it != c.lists.end())
    for (const auto& s : it->second) {
      auto cps = utf8_decode(s);
      if (cps.size() != 1) throw ParseError("character list entry is not a single code point", 0);
      chars.push_back(cps[0]);
    }
  CharLstmModel model(CharInventory(chars), cfg);
  c.get_params(model.params_);
  return model;
}

PerplexityReport char_lstm_ppl(const CharLstmModel& model, const Corpus& corpus) {
  PerplexityReport r;
  std::vector<std::int32_t> inputs, targets;
  nn::Rng rng(0);
  for (const auto& s : corpus.sentences) {
    r.oov += model.inventory().encode(s, inputs, targets);
    nn::Tape tape(model.params(), false);
    auto logits = model.logits_graph(tape, inputs, nn::Mode::Eval, rng);
    auto loss = nn::softmax_xent(tape, logits, targets);
    r.log_likelihood -= tape.value(loss)(0, 0);
    r.count += targets.size();
    ++r.sentences;
  }
  return r;
}

CharLmTraining train_char_lstm(const Corpus& train, const Corpus* dev, const CharLmConfig& config) {
  validate(config);
  if (train.sentences.empty()) throw DomainError("cannot train a character LM on an empty corpus");
  CharLstmModel model(CharInventory::from_corpus(train), config);

  struct Encoded {
    std::vector<std::int32_t> inputs;
    std::vector<std::int32_t> targets;
  };
  std::vector<Encoded> data(train.sentences.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    model.inventory().encode(train.sentences[i], data[i].inputs, data[i].targets);

  nn::AdamConfig adam_cfg;
  adam_cfg.step_size = config.step_size;
  adam_cfg.clip_norm = config.clip_norm;
  auto adam = nn::make_adam(model.params(), adam_cfg);
  nn::Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<CharEpoch> history;
  std::size_t best_epoch = 0;
  double best_dev = std::numeric_limits<double>::infinity();
  nn::ParamBlock best_params = model.params();
  std::size_t stale = 0;
  nn::GradBlock grads(model.params());

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t unit_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::size_t units = 0;
      for (std::size_t k = start; k < stop; ++k) units += data[order[k]].targets.size();
      grads.set_zero();
      for (std::size_t k = start; k < stop; ++k) {
        const auto& d = data[order[k]];
        nn::Tape tape(model.params());
        auto logits = model.logits_graph(tape, d.inputs, nn::Mode::Train, rng);
        auto loss = nn::softmax_xent(tape, logits, d.targets);
        double l = tape.value(loss)(0, 0);
        if (!std::isfinite(l)) throw NumericError("non-finite character LM loss in epoch " + std::to_string(epoch));
        loss_sum += l;
        tape.backward(loss, nn::Matrix::Constant(1, 1, 1.0 / static_cast<double>(units)), grads);
      }
      unit_sum += units;
      nn::adam_step(model.params(), grads, adam);
    }
    CharEpoch record;
    record.epoch = epoch;
    record.train_ppl = std::exp(loss_sum / static_cast<double>(unit_sum));
    if (dev) {
      double p = char_lstm_ppl(model, *dev).ppl();
      record.dev_ppl = p;
      history.push_back(record);
      if (p < best_dev) {
        best_dev = p;
        best_epoch = epoch;
        best_params = model.params();
        stale = 0;
      } else if (config.patience > 0 && ++stale >= config.patience) {
        break;
      }
    } else {
      history.push_back(record);
      best_epoch = epoch;
    }
  }
  if (dev) model.params() = best_params;
  return CharLmTraining{std::move(model), std::move(history), best_epoch};
}

}  // namespace csgan
