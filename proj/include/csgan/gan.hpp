#pragma once

// Adversarial code-switching generator.
//
// The generator reads a host-language sentence and emits one switch probability
// per token; a Bernoulli mask drawn from those probabilities decides which
// tokens are replaced by their translation. The discriminator scores whole
// sentences as real code-switched text or generated text, and its score is the
// generator's REINFORCE reward. Both networks share one embedding + BLSTM
// encoder that is only updated during generator steps.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csgan/corpus.hpp"
#include "csgan/lexicon.hpp"
#include "csgan/neural.hpp"

namespace csgan {

enum class Pooling : std::uint8_t { FinalStates, Mean };
/// Shared: D reads the encoder G trains. Private: D owns an identically shaped
/// encoder that only discriminator steps update.
enum class DiscEncoder : std::uint8_t { Shared, Private };
enum class NoiseMode : std::uint8_t { PerSentence, PerStep };
enum class RewardForm : std::uint8_t { LogD, RawD };
enum class GenerateMode : std::uint8_t { Sample, Threshold };

struct GanArch {
  std::size_t word_dim = 150;
  bool use_pos = false;
  std::size_t pos_dim = 20;
  std::size_t hidden = 64;  // per BLSTM direction
  std::size_t noise_dim = 10;
  double d_dropout = 0.3;
  Pooling pooling = Pooling::FinalStates;
  DiscEncoder disc_encoder = DiscEncoder::Shared;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::size_t d_steps = 1;
  std::size_t g_steps = 1;
  double g_step_size = 1e-3;
  double d_step_size = 1e-3;
  NoiseMode noise = NoiseMode::PerSentence;
  RewardForm reward = RewardForm::LogD;
  double baseline_decay = 0.9;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const;
};

inline constexpr double kProbClamp = 1e-7;

/// Word ids and POS ids of one sentence, as the networks consume it.
struct EncodedSentence {
  std::vector<std::int32_t> words;
  std::vector<std::int32_t> tags;
  std::size_t size() const { return words.size(); }
};

class GanModel {
 public:
  GanModel(Vocabulary vocab, TagSet tags, GanArch arch, std::uint64_t init_seed);

  const Vocabulary& vocab() const { return vocab_; }
  const TagSet& tags() const { return tags_; }
  const GanArch& arch() const { return arch_; }
  nn::ParamBlock& params() { return params_; }
  const nn::ParamBlock& params() const { return params_; }

  /// Guest tokens tag as "eng"; host tokens use their own tag, then `pos`, then "x".
  EncodedSentence encode(const Sentence& s, const PosLexicon* pos) const;

  std::vector<std::size_t> encoder_params() const { return params_.indices_with_prefix("enc."); }
  std::vector<std::size_t> generator_params() const;  // head + shared encoder
  std::vector<std::size_t> discriminator_params() const { return params_.indices_with_prefix("disc."); }

  /// Shared encoder output, T x 2H.
  nn::NodeId encoder_graph(nn::Tape& tape, const EncodedSentence& x) const;
  /// Encoder the discriminator reads: the shared one or its private copy.
  nn::NodeId disc_encoder_graph(nn::Tape& tape, const EncodedSentence& y) const;
  /// Switch probabilities, T x 1. `noise` is 1 x Z (broadcast) or T x Z.
  nn::NodeId generator_graph(nn::Tape& tape, const EncodedSentence& x, const nn::Matrix& noise) const;
  /// Real-vs-generated score, 1 x 1.
  nn::NodeId discriminator_graph(nn::Tape& tape, const EncodedSentence& y, nn::Mode mode, nn::Rng& rng) const;

  nn::Container to_container() const;
  static GanModel from_container(const nn::Container& c);

 private:
  Vocabulary vocab_;
  TagSet tags_;
  GanArch arch_;
  nn::ParamBlock params_;
  std::size_t word_table_ = 0;
  std::size_t pos_table_ = 0;
  nn::BlstmParams encoder_;
  std::size_t disc_word_table_ = 0;
  std::size_t disc_pos_table_ = 0;
  nn::BlstmParams disc_encoder_;
  nn::DenseParams gen_head_;
  nn::DenseParams disc_head_;
};

/// Vocabulary over both corpora plus every hyphen-joined translation the
/// lexicon can produce for host words of `d_zh`.
Vocabulary build_gan_vocab(const Corpus& d_cs, const Corpus& d_zh, const TranslationLexicon& lex,
                           std::size_t max_size);

nn::Matrix sample_noise(std::size_t noise_dim, std::size_t length, NoiseMode mode, nn::Rng& rng);

std::vector<double> generator_probs(const GanModel& model, const EncodedSentence& x, const nn::Matrix& noise);

struct MaskSample {
  SwitchMask mask;
  double log_prob = 0.0;
};

/// Independent Bernoulli(s_n) draws; unswitchable positions are forced to 0 and
/// excluded from the log-probability.
MaskSample sample_mask(std::span<const double> probs, const std::vector<bool>& switchable, nn::Rng& rng);
double mask_log_prob(std::span<const double> probs, const SwitchMask& mask, const std::vector<bool>& switchable);
/// d log p(mask) / d s_n.
std::vector<double> mask_log_prob_grad(std::span<const double> probs, const SwitchMask& mask,
                                       const std::vector<bool>& switchable);

/// Eval-mode discriminator score in (0, 1).
double discriminator_score(const GanModel& model, const EncodedSentence& y);
double discriminator_score(const GanModel& model, const Sentence& y, const PosLexicon* pos);

/// -(mean log D(real) + mean log(1 - D(fake))) with scores clamped to [eps, 1 - eps].
double discriminator_loss(std::span<const double> real_scores, std::span<const double> fake_scores);

double reward_of(double score, RewardForm form);

struct RewardBaseline {
  double value = 0.0;
  double decay = 0.9;
  void update(double mean_reward) { value = decay * value + (1.0 - decay) * mean_reward; }
};

struct GeneratorOutput {
  std::vector<double> probs;
  SwitchMask mask;
  Sentence realized;
  double log_prob = 0.0;
};

GeneratorOutput generate(const GanModel& model, const Sentence& x, GenerateMode mode, const TranslationLexicon& lex,
                         const PosLexicon* pos, nn::Rng& rng, NoiseMode noise = NoiseMode::PerSentence);

/// Score-function gradient contribution of one sampled mask: parameter
/// gradient of `-weight * log p(mask)` through the generator graph.
nn::GradBlock policy_gradient(const GanModel& model, const EncodedSentence& x, const nn::Matrix& noise,
                              const SwitchMask& mask, const std::vector<bool>& switchable, double weight);

struct GeneratorStepResult {
  double loss = 0.0;  // -mean log D(generated)
  double mean_reward = 0.0;
  double mean_switch_prob = 0.0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double mean_reward = 0.0;
  double mean_switch_prob = 0.0;
};

class GanTrainer {
 public:
  GanTrainer(GanModel& model, const TranslationLexicon& lex, const PosLexicon* pos, TrainConfig cfg);

  /// One Adam step on the discriminator head; the shared encoder is frozen.
  double discriminator_step(std::span<const Sentence> real, std::span<const Sentence> fake);
  /// One REINFORCE step on the generator head and shared encoder.
  GeneratorStepResult generator_step(std::span<const Sentence> hosts);
  /// A sampled generator output using the trainer's random stream.
  GeneratorOutput sample(const Sentence& x);

  std::vector<EpochStats> train(const Corpus& d_cs, const Corpus& d_zh);

  const RewardBaseline& baseline() const { return baseline_; }
  RewardBaseline& baseline() { return baseline_; }
  nn::Rng& rng() { return rng_; }

 private:
  GanModel& model_;
  const TranslationLexicon& lex_;
  const PosLexicon* pos_;
  TrainConfig cfg_;
  nn::Rng rng_;
  nn::AdamState g_opt_;
  nn::AdamState d_opt_;
  RewardBaseline baseline_;
};

std::vector<EpochStats> train(GanModel& model, const Corpus& d_cs, const Corpus& d_zh, const TranslationLexicon& lex,
                              const PosLexicon* pos, const TrainConfig& cfg);

void write_history_csv(std::ostream& out, const std::vector<EpochStats>& history);

}  // namespace csgan
