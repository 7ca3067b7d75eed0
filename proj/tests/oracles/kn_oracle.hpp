#pragma once

// Direct-formula interpolated Kneser-Ney trigram, written from the textbook
// definitions over surface strings with plain containers. It shares no code
// with the library model and exists only to cross-check it.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "csgan/corpus.hpp"

namespace oracle {

class KneserNey {
 public:
  using Tri = std::tuple<std::string, std::string, std::string>;

  // `vocab` lists the known surfaces; anything else becomes "<unk>".
  KneserNey(const csgan::Corpus& corpus, const std::set<std::string>& vocab) : vocab_(vocab) {
    for (const auto& s : corpus.sentences) {
      auto w = pad(s);
      for (std::size_t i = 2; i < w.size(); ++i) ++c3_[{w[i - 2], w[i - 1], w[i]}];
    }
    for (const auto& [t, c] : c3_) {
      const auto& [u, v, w] = t;
      bigram_left_[{v, w}].insert(u);
    }
    for (const auto& [vw, lefts] : bigram_left_) unigram_left_[vw.second].insert(vw.first);
    d3_ = discount_of(counts_of(c3_));
    std::vector<std::size_t> c2;
    for (const auto& [vw, lefts] : bigram_left_) c2.push_back(lefts.size());
    d2_ = discount_of(c2);
    std::vector<std::size_t> c1;
    for (const auto& [w, lefts] : unigram_left_) c1.push_back(lefts.size());
    d1_ = discount_of(c1);
    predictable_ = vocab_.size() + 3 - 1;  // reserved <unk> <s> </s>, minus <s>
  }

  std::vector<std::string> pad(const csgan::Sentence& s) const {
    std::vector<std::string> w{"<s>", "<s>"};
    for (const auto& t : s.tokens) w.push_back(vocab_.count(t.surface) ? t.surface : "<unk>");
    w.push_back("</s>");
    return w;
  }

  // Every word the model can emit.
  std::vector<std::string> predictable() const {
    std::vector<std::string> out(vocab_.begin(), vocab_.end());
    out.push_back("<unk>");
    out.push_back("</s>");
    return out;
  }

  double p1(const std::string& w) const {
    double uniform = 1.0 / double(predictable_);
    std::size_t total = bigram_left_.size();  // sum over w of N1+(. w) = number of bigram types
    if (total == 0) return uniform;
    auto it = unigram_left_.find(w);
    double c = it == unigram_left_.end() ? 0.0 : double(it->second.size());
    return (std::max(c - d1_, 0.0) + d1_ * double(unigram_left_.size()) * uniform) / double(total);
  }

  double p2(const std::string& w, const std::string& v) const {
    double total = 0.0, types = 0.0;
    for (const auto& [vw, lefts] : bigram_left_)
      if (vw.first == v) {
        total += double(lefts.size());
        types += 1.0;
      }
    if (total == 0.0) return p1(w);
    auto it = bigram_left_.find({v, w});
    double c = it == bigram_left_.end() ? 0.0 : double(it->second.size());
    return std::max(c - d2_, 0.0) / total + d2_ * types / total * p1(w);
  }

  double p3(const std::string& w, const std::string& u, const std::string& v) const {
    double total = 0.0, types = 0.0;
    for (const auto& [t, c] : c3_)
      if (std::get<0>(t) == u && std::get<1>(t) == v) {
        total += double(c);
        types += 1.0;
      }
    if (total == 0.0) return p2(w, v);
    auto it = c3_.find({u, v, w});
    double c = it == c3_.end() ? 0.0 : double(it->second);
    return std::max(c - d3_, 0.0) / total + d3_ * types / total * p2(w, v);
  }

  // Natural-log likelihood and scored-token count (words plus one end marker per sentence).
  std::pair<double, std::size_t> score(const csgan::Corpus& corpus) const {
    double ll = 0.0;
    std::size_t n = 0;
    for (const auto& s : corpus.sentences) {
      auto w = pad(s);
      for (std::size_t i = 2; i < w.size(); ++i) {
        ll += std::log(p3(w[i], w[i - 2], w[i - 1]));
        ++n;
      }
    }
    return {ll, n};
  }

  const std::map<Tri, std::size_t>& trigrams() const { return c3_; }
  double d1() const { return d1_; }
  double d2() const { return d2_; }
  double d3() const { return d3_; }

 private:
  static std::vector<std::size_t> counts_of(const std::map<Tri, std::size_t>& m) {
    std::vector<std::size_t> out;
    for (const auto& [k, c] : m) out.push_back(c);
    return out;
  }
  static double discount_of(const std::vector<std::size_t>& counts) {
    double n1 = double(std::count(counts.begin(), counts.end(), 1));
    double n2 = double(std::count(counts.begin(), counts.end(), 2));
    if (n1 == 0 || n2 == 0) return 0.75;
    return n1 / (n1 + 2 * n2);
  }

  std::set<std::string> vocab_;
  std::map<Tri, std::size_t> c3_;
  std::map<std::pair<std::string, std::string>, std::set<std::string>> bigram_left_;  // (v, w) -> {u}
  std::map<std::string, std::set<std::string>> unigram_left_;                          // w -> {v}
  double d1_ = 0.75, d2_ = 0.75, d3_ = 0.75;
  std::size_t predictable_ = 1;
};

}  // namespace oracle
