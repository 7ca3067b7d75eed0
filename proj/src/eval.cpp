#include "csgan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "csgan/error.hpp"

namespace csgan {

namespace {

void require_same_count(std::size_t a, std::size_t b) {
  if (a != b)
    throw AlignmentError("reference and hypothesis lists differ in size (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
}

}  // namespace

CspScores csp_metrics(std::span<const SwitchMask> reference, std::span<const SwitchMask> hypothesis) {
  require_same_count(reference.size(), hypothesis.size());
  CspScores s;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& r = reference[i].bits;
    const auto& h = hypothesis[i].bits;
    if (r.size() != h.size())
      throw AlignmentError("mask length mismatch at sentence " + std::to_string(i) + " (" + std::to_string(r.size()) +
                           " vs " + std::to_string(h.size()) + ")");
    for (std::size_t n = 0; n < r.size(); ++n) {
      s.reference += r[n];
      s.predicted += h[n];
      s.true_positives += r[n] && h[n];
    }
  }
  auto tp = static_cast<double>(s.true_positives);
  s.precision = s.predicted ? tp / static_cast<double>(s.predicted) : 0.0;
  s.recall = s.reference ? tp / static_cast<double>(s.reference) : 0.0;
  s.f = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::size_t levenshtein(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

struct UnigramCounts {
  std::size_t clipped = 0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

UnigramCounts unigram_counts(const Sentence& ref, const Sentence& hyp) {
  std::map<std::string, std::size_t> ref_counts;
  for (const auto& t : ref.tokens) ++ref_counts[t.surface];
  std::map<std::string, std::size_t> hyp_counts;
  for (const auto& t : hyp.tokens) ++hyp_counts[t.surface];
  UnigramCounts c;
  for (const auto& [w, n] : hyp_counts) {
    auto it = ref_counts.find(w);
    if (it != ref_counts.end()) c.clipped += std::min(n, it->second);
  }
  c.hyp_len = hyp.size();
  c.ref_len = ref.size();
  return c;
}

double combine_bleu1(const UnigramCounts& c) {
  if (c.hyp_len == 0) return 0.0;
  double precision = static_cast<double>(c.clipped) / static_cast<double>(c.hyp_len);
  double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(c.ref_len) / static_cast<double>(c.hyp_len)));
  return precision * bp;
}

}  // namespace

double bleu1(const Sentence& reference, const Sentence& hypothesis) {
  if (reference.empty() || hypothesis.empty()) throw DomainError("BLEU-1 needs non-empty sentences");
  return combine_bleu1(unigram_counts(reference, hypothesis));
}

double corpus_bleu1(std::span<const Sentence> references, std::span<const Sentence> hypotheses) {
  require_same_count(references.size(), hypotheses.size());
  UnigramCounts total;
  for (std::size_t i = 0; i < references.size(); ++i) {
    auto c = unigram_counts(references[i], hypotheses[i]);
    total.clipped += c.clipped;
    total.hyp_len += c.hyp_len;
    total.ref_len += c.ref_len;
  }
  return combine_bleu1(total);
}

double wer(std::span<const Sentence> references, std::span<const Sentence> hypotheses) {
  if (references.empty()) throw DomainError("WER of an empty reference list");
  require_same_count(references.size(), hypotheses.size());
  std::size_t edits = 0;
  std::size_t words = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    auto r = references[i].surfaces();
    auto h = hypotheses[i].surfaces();
    edits += levenshtein(r, h);
    words += r.size();
  }
  if (words == 0) throw DomainError("WER with zero reference words");
  return static_cast<double>(edits) / static_cast<double>(words);
}

LangErrors attributed_errors(const Sentence& reference, const Sentence& hypothesis) {
  const auto& r = reference.tokens;
  const auto& h = hypothesis.tokens;
  const std::size_t n = r.size();
  const std::size_t m = h.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (r[i - 1].surface == h[j - 1].surface ? 0 : 1), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});

  LangErrors e;
  auto charge = [&](Lang lang) { (lang == Lang::Host ? e.host : e.guest) += 1; };
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      std::size_t cost = r[i - 1].surface == h[j - 1].surface ? 0 : 1;
      if (at(i, j) == at(i - 1, j - 1) + cost) {
        if (cost) charge(r[i - 1].lang);
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      charge(r[i - 1].lang);
      --i;
      continue;
    }
    charge(h[j - 1].lang);
    --j;
  }
  return e;
}

std::optional<double> restricted_wer(std::span<const Sentence> references, std::span<const Sentence> hypotheses,
                                     Lang lang) {
  if (references.empty()) throw DomainError("WER of an empty reference list");
  require_same_count(references.size(), hypotheses.size());
  std::size_t errors = 0;
  std::size_t words = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    auto e = attributed_errors(references[i], hypotheses[i]);
    errors += lang == Lang::Host ? e.host : e.guest;
    for (const auto& t : references[i].tokens) words += t.lang == lang;
  }
  if (words == 0) return std::nullopt;
  return static_cast<double>(errors) / static_cast<double>(words);
}

MetricReport evaluate(std::span<const Sentence> references, std::span<const Sentence> hypotheses) {
  require_same_count(references.size(), hypotheses.size());
  std::vector<SwitchMask> ref_masks;
  std::vector<SwitchMask> hyp_masks;
  for (std::size_t i = 0; i < references.size(); ++i) {
    ref_masks.push_back(guest_mask(references[i]));
    hyp_masks.push_back(guest_mask(hypotheses[i]));
  }
  MetricReport r;
  r.csp = csp_metrics(ref_masks, hyp_masks);
  r.bleu1 = corpus_bleu1(references, hypotheses);
  r.wer_total = wer(references, hypotheses);
  r.wer_guest = restricted_wer(references, hypotheses, Lang::Guest);
  r.wer_host = restricted_wer(references, hypotheses, Lang::Host);
  return r;
}

void write_metric_header(std::ostream& out) { out << "method,precision,recall,f,bleu1,wer,wer_guest,wer_host\n"; }

void write_metric_row(std::ostream& out, const std::string& method, const MetricReport& r) {
  char buf[256];
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("undefined");
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", *v * 100.0);
    return std::string(b);
  };
  std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f,%.2f", r.csp.precision, r.csp.recall, r.csp.f, r.bleu1,
                r.wer_total * 100.0);
  out << method << ',' << buf << ',' << pct(r.wer_guest) << ',' << pct(r.wer_host) << '\n';
}

}  // namespace csgan
