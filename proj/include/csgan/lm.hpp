#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "csgan/corpus.hpp"
#include "csgan/neural.hpp"

namespace csgan {

/// Natural-log perplexity over scored units (words or characters plus one end
/// marker per sentence; start markers are never scored).
struct PerplexityReport {
  double log_likelihood = 0.0;
  std::size_t count = 0;
  std::size_t oov = 0;
  std::size_t sentences = 0;
  double ppl() const;
};

void write_ppl_text(std::ostream& out, const PerplexityReport& r);

// ------------------------------------------------------------ KN trigram

/// Interpolated Kneser-Ney trigram. Lower orders use continuation counts, each
/// order has its own absolute discount n1 / (n1 + 2 n2), and the unigram level
/// interpolates with a uniform distribution over every predictable word
/// (the vocabulary minus the start marker).
class KnTrigram {
 public:
  static constexpr double kFallbackDiscount = 0.75;

  KnTrigram() = default;
  explicit KnTrigram(Vocabulary vocab) : vocab_(std::move(vocab)) {}

  /// Adds one sentence's trigram counts. Call finalize() before querying.
  void add_sentence(const Sentence& s);
  void finalize();

  /// p(w | u v) with ids from vocab(); u, v may be the start marker.
  double prob(std::int32_t w, std::int32_t u, std::int32_t v) const;
  double bigram_prob(std::int32_t w, std::int32_t v) const;
  double unigram_prob(std::int32_t w) const;

  const Vocabulary& vocab() const { return vocab_; }
  /// Discount per order, index 0 = unigram.
  double discount(int order) const { return discounts_.at(static_cast<std::size_t>(order - 1)); }
  /// Orders that fell back to the default discount.
  const std::vector<int>& fallback_orders() const { return fallback_orders_; }
  std::size_t predictable_size() const { return vocab_.size() - 1; }
  std::size_t trigram_count(std::int32_t u, std::int32_t v, std::int32_t w) const;

  /// Plain-text count table: header, vocabulary and trigram counts.
  void write(std::ostream& out) const;
  static KnTrigram read(std::istream& in);

 private:
  static std::uint64_t key(std::int32_t a, std::int32_t b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }
  static std::uint64_t key(std::int32_t a, std::int32_t b, std::int32_t c) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 42) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b)) << 21) | static_cast<std::uint32_t>(c);
  }

  struct ContextStats {
    std::size_t total = 0;  // sum of counts following the context
    std::size_t types = 0;  // distinct followers
  };

  Vocabulary vocab_;
  bool finalized_ = false;
  std::unordered_map<std::uint64_t, std::size_t> trigrams_;
  std::unordered_map<std::uint64_t, ContextStats> tri_ctx_;   // (u, v)
  std::unordered_map<std::uint64_t, std::size_t> bi_cont_;    // N1+(. v w)
  std::unordered_map<std::int32_t, ContextStats> bi_ctx_;     // v -> sum / types of N1+(. v w)
  std::unordered_map<std::int32_t, std::size_t> uni_cont_;    // N1+(. w)
  std::size_t uni_total_ = 0;                                 // sum of N1+(. w)
  std::size_t uni_types_ = 0;
  std::vector<double> discounts_ = {kFallbackDiscount, kFallbackDiscount, kFallbackDiscount};
  std::vector<int> fallback_orders_;
};

/// Vocabulary defaults to every training word; OOV words map to the unknown marker.
KnTrigram train_kn(const Corpus& corpus, std::optional<Vocabulary> vocab = std::nullopt);
PerplexityReport ngram_ppl(const KnTrigram& model, const Corpus& corpus);

// ------------------------------------------------------------ Char LSTM

/// Character inventory: reserved <unk>, <s>, </s>, space, then training
/// characters by code point.
class CharInventory {
 public:
  static constexpr std::int32_t kUnk = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;
  static constexpr std::int32_t kSpace = 3;

  CharInventory();
  explicit CharInventory(const std::vector<char32_t>& chars);
  static CharInventory from_corpus(const Corpus& corpus);

  std::size_t size() const { return chars_.size() + 4; }
  std::int32_t id(char32_t c) const;
  const std::vector<char32_t>& chars() const { return chars_; }

  /// Input ids (<s> then characters) and target ids (characters then </s>);
  /// tokens are joined by single spaces. Returns the unknown-character count.
  std::size_t encode(const Sentence& s, std::vector<std::int32_t>& inputs, std::vector<std::int32_t>& targets) const;

 private:
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, std::int32_t> index_;
};

struct CharLmConfig {
  std::size_t hidden = 32;
  std::size_t embed_dim = 0;  // 0 -> hidden
  double dropout = 0.7;       // applied between the two LSTM layers
  double step_size = 0.5;
  double clip_norm = 5.0;
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  std::size_t patience = 3;  // 0 disables early stopping
  std::uint64_t seed = 1;
};

class CharLstmModel {
 public:
  CharLstmModel(CharInventory inventory, const CharLmConfig& config);

  const CharInventory& inventory() const { return inventory_; }
  const CharLmConfig& config() const { return config_; }
  nn::ParamBlock& params() { return params_; }
  const nn::ParamBlock& params() const { return params_; }

  /// Next-character logits, one row per input position.
  nn::NodeId logits_graph(nn::Tape& tape, const std::vector<std::int32_t>& inputs, nn::Mode mode,
                          nn::Rng& rng) const;
  /// Eval-mode next-character distributions for a sentence (rows sum to 1).
  nn::Matrix distributions(const Sentence& s) const;

  nn::Container to_container() const;
  static CharLstmModel from_container(const nn::Container& c);

 private:
  CharInventory inventory_;
  CharLmConfig config_;
  nn::ParamBlock params_;
  std::size_t embedding_ = 0;
  nn::LstmParams layer1_;
  nn::LstmParams layer2_;
  nn::DenseParams output_;
};

struct CharEpoch {
  std::size_t epoch = 0;
  double train_ppl = 0.0;
  std::optional<double> dev_ppl;
};

struct CharLmTraining {
  CharLstmModel model;
  std::vector<CharEpoch> history;
  std::size_t best_epoch = 0;
};

/// Adam on next-character cross-entropy. With a dev corpus, keeps the
/// parameters of the best dev epoch and stops after `patience` epochs without
/// improvement. Throws NumericError on a non-finite loss.
CharLmTraining train_char_lstm(const Corpus& train, const Corpus* dev, const CharLmConfig& config);
PerplexityReport char_lstm_ppl(const CharLstmModel& model, const Corpus& corpus);

}  // namespace csgan
