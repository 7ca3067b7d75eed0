#include "csgan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "csgan/error.hpp"

namespace csgan {

using nn::Matrix;
using nn::NodeId;
using nn::Tape;

void TrainConfig::validate() const {
  if (batch_size < 1 || d_steps < 1 || g_steps < 1) throw ConfigError("batch size and step counts must be >= 1");
  if (g_step_size <= 0.0 || d_step_size <= 0.0) throw ConfigError("step sizes must be positive");
  if (baseline_decay < 0.0 || baseline_decay >= 1.0) throw ConfigError("baseline decay must lie in [0, 1)");
}

// ------------------------------------------------------------------ GanModel

GanModel::GanModel(Vocabulary vocab, TagSet tags, GanArch arch, std::uint64_t init_seed)
    : vocab_(std::move(vocab)), tags_(std::move(tags)), arch_(arch) {
  if (arch_.word_dim == 0 || arch_.hidden == 0) throw ConfigError("word_dim and hidden must be positive");
  if (arch_.use_pos && arch_.pos_dim == 0) throw ConfigError("pos_dim must be positive when POS is used");
  auto H = static_cast<Eigen::Index>(arch_.hidden);
  word_table_ = nn::add_embedding(params_, "enc.word_emb", static_cast<Eigen::Index>(vocab_.size()),
                                  static_cast<Eigen::Index>(arch_.word_dim));
  Eigen::Index in = static_cast<Eigen::Index>(arch_.word_dim);
  if (arch_.use_pos) {
    pos_table_ = nn::add_embedding(params_, "enc.pos_emb", static_cast<Eigen::Index>(TagSet::kMaxTags),
                                   static_cast<Eigen::Index>(arch_.pos_dim));
    in += static_cast<Eigen::Index>(arch_.pos_dim);
  }
  encoder_ = nn::add_blstm(params_, "enc.blstm", in, H);
  if (arch_.disc_encoder == DiscEncoder::Private) {
    disc_word_table_ = nn::add_embedding(params_, "disc.word_emb", static_cast<Eigen::Index>(vocab_.size()),
                                         static_cast<Eigen::Index>(arch_.word_dim));
    if (arch_.use_pos)
      disc_pos_table_ = nn::add_embedding(params_, "disc.pos_emb", static_cast<Eigen::Index>(TagSet::kMaxTags),
                                          static_cast<Eigen::Index>(arch_.pos_dim));
    disc_encoder_ = nn::add_blstm(params_, "disc.blstm", in, H);
  }
  gen_head_ = nn::add_dense(params_, "gen.head", 2 * H + static_cast<Eigen::Index>(arch_.noise_dim), 1);
  disc_head_ = nn::add_dense(params_, "disc.head", 2 * H, 1);
  params_.initialize(init_seed);
}

std::vector<std::size_t> GanModel::generator_params() const {
  auto out = params_.indices_with_prefix("gen.");
  auto enc = encoder_params();
  out.insert(out.end(), enc.begin(), enc.end());
  std::sort(out.begin(), out.end());
  return out;
}

EncodedSentence GanModel::encode(const Sentence& s, const PosLexicon* pos) const {
  EncodedSentence e;
  e.words = vocab_.encode(s);
  e.tags.reserve(s.size());
  for (const auto& t : s.tokens) {
    std::string_view tag;
    if (t.lang == Lang::Guest) {
      tag = TagSet::kGuestTag;
    } else if (t.pos) {
      tag = *t.pos;
    } else if (pos) {
      tag = pos->tag_of(t.surface);
    } else {
      tag = TagSet::kDefaultTag;
    }
    e.tags.push_back(tags_.id_or_default(tag));
  }
  return e;
}

namespace {

NodeId run_encoder(Tape& tape, const EncodedSentence& x, bool use_pos, std::size_t words, std::size_t tags,
                   const nn::BlstmParams& blstm) {
  if (x.words.empty()) throw DomainError("cannot encode an empty sentence");
  NodeId in = nn::embed(tape, words, x.words);
  if (use_pos) {
    if (x.tags.size() != x.words.size()) throw ShapeError("POS ids do not match sentence length");
    in = nn::concat_cols(tape, in, nn::embed(tape, tags, x.tags));
  }
  return nn::blstm(tape, blstm, in);
}

}  // namespace

NodeId GanModel::encoder_graph(Tape& tape, const EncodedSentence& x) const {
  return run_encoder(tape, x, arch_.use_pos, word_table_, pos_table_, encoder_);
}

NodeId GanModel::disc_encoder_graph(Tape& tape, const EncodedSentence& y) const {
  if (arch_.disc_encoder == DiscEncoder::Shared) return encoder_graph(tape, y);
  return run_encoder(tape, y, arch_.use_pos, disc_word_table_, disc_pos_table_, disc_encoder_);
}

NodeId GanModel::generator_graph(Tape& tape, const EncodedSentence& x, const Matrix& noise) const {
  NodeId h = encoder_graph(tape, x);
  if (arch_.noise_dim > 0) {
    auto T = static_cast<Eigen::Index>(x.size());
    if (noise.cols() != static_cast<Eigen::Index>(arch_.noise_dim) || (noise.rows() != 1 && noise.rows() != T))
      throw ShapeError("noise must be 1 x Z or T x Z");
    NodeId z = tape.constant(noise);
    if (noise.rows() == 1) z = nn::broadcast_rows(tape, z, T);
    h = nn::concat_cols(tape, h, z);
  }
  return nn::dense_sigmoid(tape, gen_head_, h);
}

NodeId GanModel::discriminator_graph(Tape& tape, const EncodedSentence& y, nn::Mode mode, nn::Rng& rng) const {
  NodeId h = disc_encoder_graph(tape, y);
  NodeId pooled = arch_.pooling == Pooling::FinalStates ? nn::final_states(tape, h) : nn::mean_rows(tape, h);
  pooled = nn::dropout(tape, pooled, arch_.d_dropout, rng, mode);
  return nn::dense_sigmoid(tape, disc_head_, pooled);
}

nn::Container GanModel::to_container() const {
  nn::Container c;
  c.meta["kind"] = "gan";
  c.meta["word_dim"] = std::to_string(arch_.word_dim);
  c.meta["use_pos"] = arch_.use_pos ? "1" : "0";
  c.meta["pos_dim"] = std::to_string(arch_.pos_dim);
  c.meta["hidden"] = std::to_string(arch_.hidden);
  c.meta["noise_dim"] = std::to_string(arch_.noise_dim);
  std::ostringstream dr;
  dr.precision(17);
  dr << arch_.d_dropout;
  c.meta["d_dropout"] = dr.str();
  c.meta["pooling"] = arch_.pooling == Pooling::FinalStates ? "final" : "mean";
  c.meta["disc_encoder"] = arch_.disc_encoder == DiscEncoder::Shared ? "shared" : "private";
  c.lists["vocab"] = vocab_.surfaces();
  c.lists["tags"] = tags_.tags();
  c.lists["noun_tags"] = tags_.noun_tags();
  c.put_params(params_);
  return c;
}

GanModel GanModel::from_container(const nn::Container& c) {
  if (c.require_meta("kind") != "gan") throw ParseError("checkpoint is not a GAN model", 0);
  GanArch arch;
  arch.word_dim = std::stoul(c.require_meta("word_dim"));
  arch.use_pos = c.require_meta("use_pos") == "1";
  arch.pos_dim = std::stoul(c.require_meta("pos_dim"));
  arch.hidden = std::stoul(c.require_meta("hidden"));
  arch.noise_dim = std::stoul(c.require_meta("noise_dim"));
  arch.d_dropout = std::stod(c.require_meta("d_dropout"));
  arch.pooling = c.require_meta("pooling") == "mean" ? Pooling::Mean : Pooling::FinalStates;
  arch.disc_encoder = c.require_meta("disc_encoder") == "private" ? DiscEncoder::Private : DiscEncoder::Shared;
  auto list = [&](const std::string& name) {
    auto it = c.lists.find(name);
    if (it == c.lists.end()) throw ParseError("checkpoint lacks list " + name, 0);
    return it->second;
  };
  GanModel model(Vocabulary(list("vocab")), TagSet(list("tags"), list("noun_tags")), arch, 0);
  c.get_params(model.params_);
  return model;
}

Vocabulary build_gan_vocab(const Corpus& d_cs, const Corpus& d_zh, const TranslationLexicon& lex,
                           std::size_t max_size) {
  std::vector<std::string> extra;
  for (const auto& s : d_zh.sentences)
    for (const auto& t : s.tokens)
      if (auto j = lex.joined(t.surface)) extra.push_back(std::move(*j));
  return build_vocab({&d_cs, &d_zh}, max_size, extra);
}

// --------------------------------------------------------- Sampling & scores

Matrix sample_noise(std::size_t noise_dim, std::size_t length, NoiseMode mode, nn::Rng& rng) {
  auto rows = static_cast<Eigen::Index>(mode == NoiseMode::PerSentence ? 1 : length);
  Matrix z(rows, static_cast<Eigen::Index>(noise_dim));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = normal(rng);
  return z;
}

std::vector<double> generator_probs(const GanModel& model, const EncodedSentence& x, const Matrix& noise) {
  Tape tape(model.params(), false);
  NodeId out = model.generator_graph(tape, x, noise);
  const Matrix& v = tape.value(out);
  return {v.data(), v.data() + v.size()};
}

MaskSample sample_mask(std::span<const double> probs, const std::vector<bool>& switchable, nn::Rng& rng) {
  if (probs.size() != switchable.size()) throw ShapeError("probabilities and switchable flags differ in length");
  MaskSample out;
  out.mask.bits.assign(probs.size(), false);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (!switchable[n]) continue;
    bool bit = unit(rng) < probs[n];
    out.mask.bits[n] = bit;
    out.log_prob += std::log(bit ? probs[n] : 1.0 - probs[n]);
  }
  return out;
}

namespace {

void check_mask(std::span<const double> probs, const SwitchMask& mask, const std::vector<bool>& switchable) {
  if (probs.size() != mask.size() || probs.size() != switchable.size())
    throw ShapeError("mask, probabilities and switchable flags differ in length");
  for (std::size_t n = 0; n < mask.size(); ++n)
    if (mask.bits[n] && !switchable[n])
      throw DomainError("switch bit set on untranslatable position " + std::to_string(n));
}

}  // namespace

double mask_log_prob(std::span<const double> probs, const SwitchMask& mask, const std::vector<bool>& switchable) {
  check_mask(probs, mask, switchable);
  double lp = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n)
    if (switchable[n]) lp += std::log(mask.bits[n] ? probs[n] : 1.0 - probs[n]);
  return lp;
}

std::vector<double> mask_log_prob_grad(std::span<const double> probs, const SwitchMask& mask,
                                       const std::vector<bool>& switchable) {
  check_mask(probs, mask, switchable);
  std::vector<double> g(probs.size(), 0.0);
  for (std::size_t n = 0; n < probs.size(); ++n)
    if (switchable[n]) g[n] = mask.bits[n] ? 1.0 / probs[n] : -1.0 / (1.0 - probs[n]);
  return g;
}

double discriminator_score(const GanModel& model, const EncodedSentence& y) {
  Tape tape(model.params(), false);
  nn::Rng unused(0);
  NodeId out = model.discriminator_graph(tape, y, nn::Mode::Eval, unused);
  return tape.value(out)(0, 0);
}

double discriminator_score(const GanModel& model, const Sentence& y, const PosLexicon* pos) {
  return discriminator_score(model, model.encode(y, pos));
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

}  // namespace

double discriminator_loss(std::span<const double> real_scores, std::span<const double> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw DomainError("discriminator loss needs real and fake scores");
  double real = 0.0;
  for (double p : real_scores) real += std::log(clamp_prob(p));
  double fake = 0.0;
  for (double p : fake_scores) fake += std::log(1.0 - clamp_prob(p));
  return -(real / static_cast<double>(real_scores.size()) + fake / static_cast<double>(fake_scores.size()));
}

double reward_of(double score, RewardForm form) {
  return form == RewardForm::LogD ? std::log(clamp_prob(score)) : score;
}

GeneratorOutput generate(const GanModel& model, const Sentence& x, GenerateMode mode, const TranslationLexicon& lex,
                         const PosLexicon* pos, nn::Rng& rng, NoiseMode noise) {
  if (x.empty()) throw DomainError("cannot generate from an empty sentence");
  EncodedSentence enc = model.encode(x, pos);
  auto switchable = switchable_positions(x, lex);
  GeneratorOutput out;
  if (mode == GenerateMode::Threshold) {
    Matrix z = Matrix::Zero(1, static_cast<Eigen::Index>(model.arch().noise_dim));
    out.probs = generator_probs(model, enc, z);
    out.mask.bits.assign(x.size(), false);
    for (std::size_t n = 0; n < x.size(); ++n) out.mask.bits[n] = switchable[n] && out.probs[n] > 0.5;
    out.log_prob = mask_log_prob(out.probs, out.mask, switchable);
  } else {
    Matrix z = sample_noise(model.arch().noise_dim, x.size(), noise, rng);
    out.probs = generator_probs(model, enc, z);
    auto ms = sample_mask(out.probs, switchable, rng);
    out.mask = std::move(ms.mask);
    out.log_prob = ms.log_prob;
  }
  out.realized = realize(x, out.mask, lex);
  return out;
}

namespace {

Matrix policy_upstream(std::span<const double> probs, const SwitchMask& mask, const std::vector<bool>& switchable,
                       double weight) {
  auto g = mask_log_prob_grad(probs, mask, switchable);
  Matrix up(static_cast<Eigen::Index>(g.size()), 1);
  for (std::size_t n = 0; n < g.size(); ++n) up(static_cast<Eigen::Index>(n), 0) = -weight * g[n];
  return up;
}

}  // namespace

nn::GradBlock policy_gradient(const GanModel& model, const EncodedSentence& x, const Matrix& noise,
                              const SwitchMask& mask, const std::vector<bool>& switchable, double weight) {
  Tape tape(model.params());
  tape.freeze("disc.");
  NodeId out = model.generator_graph(tape, x, noise);
  const Matrix& v = tape.value(out);
  std::vector<double> probs(v.data(), v.data() + v.size());
  return tape.backward(out, policy_upstream(probs, mask, switchable, weight));
}

// ------------------------------------------------------------------- Trainer

GanTrainer::GanTrainer(GanModel& model, const TranslationLexicon& lex, const PosLexicon* pos, TrainConfig cfg)
    : model_(model), lex_(lex), pos_(pos), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  nn::AdamConfig g;
  g.step_size = cfg_.g_step_size;
  g.clip_norm = cfg_.clip_norm;
  nn::AdamConfig d;
  d.step_size = cfg_.d_step_size;
  d.clip_norm = cfg_.clip_norm;
  g_opt_ = nn::make_adam(model_.params(), model_.generator_params(), g);
  d_opt_ = nn::make_adam(model_.params(), model_.discriminator_params(), d);
  baseline_.decay = cfg_.baseline_decay;
}

double GanTrainer::discriminator_step(std::span<const Sentence> real, std::span<const Sentence> fake) {
  if (real.empty() || fake.empty()) throw DomainError("discriminator step needs real and fake batches");
  nn::GradBlock grads(model_.params());
  std::vector<double> real_scores;
  std::vector<double> fake_scores;
  auto run = [&](const Sentence& y, bool is_real, double inv_n) {
    Tape tape(model_.params());
    tape.freeze("enc.");
    tape.freeze("gen.");
    NodeId out = model_.discriminator_graph(tape, model_.encode(y, pos_), nn::Mode::Train, rng_);
    double p = tape.value(out)(0, 0);
    (is_real ? real_scores : fake_scores).push_back(p);
    bool clamped = p <= kProbClamp || p >= 1.0 - kProbClamp;
    Matrix up(1, 1);
    up(0, 0) = clamped ? 0.0 : (is_real ? -1.0 / p : 1.0 / (1.0 - p)) * inv_n;
    tape.backward(out, up, grads);
  };
  for (const auto& y : real) run(y, true, 1.0 / static_cast<double>(real.size()));
  for (const auto& y : fake) run(y, false, 1.0 / static_cast<double>(fake.size()));
  double loss = discriminator_loss(real_scores, fake_scores);
  if (!std::isfinite(loss)) throw NumericError("non-finite discriminator loss");
  nn::adam_step(model_.params(), grads, d_opt_);
  return loss;
}

GeneratorStepResult GanTrainer::generator_step(std::span<const Sentence> hosts) {
  if (hosts.empty()) throw DomainError("generator step needs a non-empty batch");
  nn::GradBlock grads(model_.params());
  GeneratorStepResult res;
  double inv_b = 1.0 / static_cast<double>(hosts.size());
  double loss = 0.0;
  double reward_sum = 0.0;
  double prob_sum = 0.0;
  std::size_t prob_count = 0;
  for (std::size_t k = 0; k < hosts.size(); ++k) {
    const Sentence& x = hosts[k];
    EncodedSentence enc = model_.encode(x, pos_);
    auto switchable = switchable_positions(x, lex_);
    Matrix z = sample_noise(model_.arch().noise_dim, x.size(), cfg_.noise, rng_);
    Tape tape(model_.params());
    tape.freeze("disc.");
    NodeId out = model_.generator_graph(tape, enc, z);
    const Matrix& v = tape.value(out);
    std::vector<double> probs(v.data(), v.data() + v.size());
    for (double s : probs) prob_sum += s;
    prob_count += probs.size();
    auto ms = sample_mask(probs, switchable, rng_);
    Sentence y;
    try {
      y = realize(x, ms.mask, lex_);
    } catch (const RealizationError& e) {
      throw RealizationError(std::string(e.what()) + " (batch sentence " + std::to_string(k) + ", source line " +
                             std::to_string(x.source_line) + ")");
    }
    double score = discriminator_score(model_, model_.encode(y, pos_));
    double r = reward_of(score, cfg_.reward);
    reward_sum += r;
    loss -= std::log(clamp_prob(score));
    double advantage = r - baseline_.value;
    tape.backward(out, policy_upstream(probs, ms.mask, switchable, advantage * inv_b), grads);
  }
  nn::adam_step(model_.params(), grads, g_opt_);
  res.loss = loss * inv_b;
  res.mean_reward = reward_sum * inv_b;
  res.mean_switch_prob = prob_count ? prob_sum / static_cast<double>(prob_count) : 0.0;
  baseline_.update(res.mean_reward);
  return res;
}

GeneratorOutput GanTrainer::sample(const Sentence& x) {
  return generate(model_, x, GenerateMode::Sample, lex_, pos_, rng_, cfg_.noise);
}

std::vector<EpochStats> GanTrainer::train(const Corpus& d_cs, const Corpus& d_zh) {
  if (d_cs.sentences.empty() || d_zh.sentences.empty()) throw DomainError("GAN training needs both corpora");
  for (const auto& s : d_zh.sentences)
    if (!s.is_host_monolingual())
      throw DomainError("host corpus contains a guest token at source line " + std::to_string(s.source_line));
  if (coverage(lex_, d_zh) == 0.0)
    throw DomainError("translation lexicon covers no host token of the host corpus; nothing can be switched");

  std::vector<EpochStats> history;
  std::vector<std::size_t> host_order(d_zh.size());
  std::vector<std::size_t> real_order(d_cs.size());
  std::iota(real_order.begin(), real_order.end(), 0);
  std::shuffle(real_order.begin(), real_order.end(), rng_);
  std::size_t real_cursor = 0;
  auto next_real = [&]() -> const Sentence& {
    if (real_cursor == real_order.size()) {
      std::shuffle(real_order.begin(), real_order.end(), rng_);
      real_cursor = 0;
    }
    return d_cs.sentences[real_order[real_cursor++]];
  };

  for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    std::iota(host_order.begin(), host_order.end(), 0);
    std::shuffle(host_order.begin(), host_order.end(), rng_);
    EpochStats st;
    st.epoch = epoch;
    std::size_t d_count = 0;
    std::size_t g_count = 0;
    for (std::size_t start = 0; start < host_order.size(); start += cfg_.batch_size) {
      std::size_t end = std::min(start + cfg_.batch_size, host_order.size());
      std::vector<Sentence> hosts;
      hosts.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) hosts.push_back(d_zh.sentences[host_order[i]]);
      for (std::size_t k = 0; k < cfg_.d_steps; ++k) {
        std::vector<Sentence> real;
        std::vector<Sentence> fake;
        for (const auto& x : hosts) {
          real.push_back(next_real());
          fake.push_back(sample(x).realized);
        }
        st.d_loss += discriminator_step(real, fake);
        ++d_count;
      }
      for (std::size_t k = 0; k < cfg_.g_steps; ++k) {
        auto g = generator_step(hosts);
        st.g_loss += g.loss;
        st.mean_reward += g.mean_reward;
        st.mean_switch_prob += g.mean_switch_prob;
        ++g_count;
      }
    }
    st.d_loss /= static_cast<double>(d_count);
    st.g_loss /= static_cast<double>(g_count);
    st.mean_reward /= static_cast<double>(g_count);
    st.mean_switch_prob /= static_cast<double>(g_count);
    history.push_back(st);
  }
  return history;
}

std::vector<EpochStats> train(GanModel& model, const Corpus& d_cs, const Corpus& d_zh, const TranslationLexicon& lex,
                              const PosLexicon* pos, const TrainConfig& cfg) {
  GanTrainer trainer(model, lex, pos, cfg);
  return trainer.train(d_cs, d_zh);
}

void write_history_csv(std::ostream& out, const std::vector<EpochStats>& history) {
  out << "epoch,d_loss,g_loss,mean_reward,mean_switch_prob\n";
  out.precision(10);
  for (const auto& h : history)
    out << h.epoch << ',' << h.d_loss << ',' << h.g_loss << ',' << h.mean_reward << ',' << h.mean_switch_prob << '\n';
}

}  // namespace csgan
