#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csgan/corpus.hpp"
#include "csgan/lexicon.hpp"

namespace csgan {

struct CspScores {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  std::size_t true_positives = 0;
  std::size_t predicted = 0;
  std::size_t reference = 0;
};

/// Micro-averaged code-switching-point precision/recall/F over all positions.
/// Zero denominators yield 0. Throws AlignmentError naming the first pair whose lengths differ.
CspScores csp_metrics(std::span<const SwitchMask> reference, std::span<const SwitchMask> hypothesis);

/// Token-level edit distance with unit costs.
std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b);

/// Clipped unigram precision times brevity penalty.
double bleu1(const Sentence& reference, const Sentence& hypothesis);
/// Clipped counts and lengths summed over the corpus before combining.
double corpus_bleu1(std::span<const Sentence> references, std::span<const Sentence> hypotheses);

/// Total edit distance over total reference words. Throws DomainError on an empty list.
double wer(std::span<const Sentence> references, std::span<const Sentence> hypotheses);

struct LangErrors {
  std::size_t host = 0;
  std::size_t guest = 0;
};

/// Errors of one minimum-edit alignment split by language: substitutions and
/// deletions count toward the reference token's language, insertions toward
/// the hypothesis token's language. Ties prefer diagonal, then deletion.
LangErrors attributed_errors(const Sentence& reference, const Sentence& hypothesis);

/// Language-restricted WER: attributed errors of `lang` over reference tokens
/// of `lang`. nullopt when the references hold no token of that language.
std::optional<double> restricted_wer(std::span<const Sentence> references, std::span<const Sentence> hypotheses,
                                     Lang lang);

struct MetricReport {
  CspScores csp;
  double bleu1 = 0.0;
  double wer_total = 0.0;
  std::optional<double> wer_guest;
  std::optional<double> wer_host;
};

/// Full metric row for hypotheses aligned position-by-position to gold
/// code-switched references (switch points = guest positions).
MetricReport evaluate(std::span<const Sentence> references, std::span<const Sentence> hypotheses);

void write_metric_header(std::ostream& out);
/// One comma-separated row: method, precision, recall, f, bleu1, wer, wer_guest, wer_host.
/// WER values are percentages.
void write_metric_row(std::ostream& out, const std::string& method, const MetricReport& report);

}  // namespace csgan
