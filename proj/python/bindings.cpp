#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "csgan/baselines.hpp"
#include "csgan/corpus.hpp"
#include "csgan/error.hpp"
#include "csgan/eval.hpp"
#include "csgan/gan.hpp"
#include "csgan/lexicon.hpp"
#include "csgan/lm.hpp"
#include "csgan/pipeline.hpp"

namespace py = pybind11;
using namespace csgan;

namespace {

Corpus corpus_from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in).corpus;
}

Corpus corpus_from_lines(const std::vector<std::string>& lines) {
  Corpus c;
  for (const auto& l : lines) c.sentences.push_back(parse_sentence(l));
  return c;
}

std::vector<std::string> corpus_lines(const Corpus& c) {
  std::ostringstream out;
  write_corpus(out, c);
  std::vector<std::string> lines;
  std::istringstream in(out.str());
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::string sentence_line(const Sentence& s) {
  auto lines = corpus_lines(Corpus{{s}});
  return lines.empty() ? std::string() : lines.front();
}

SwitchMask mask_of(const std::vector<bool>& bits) { return SwitchMask{bits}; }

RunConfig config_of(const std::string& ini) {
  std::istringstream in(ini);
  return parse_run_config(in);
}

py::dict report_dict(const MetricReport& r) {
  py::dict d;
  d["precision"] = r.csp.precision;
  d["recall"] = r.csp.recall;
  d["f"] = r.csp.f;
  d["bleu1"] = r.bleu1;
  d["wer"] = r.wer_total;
  d["wer_guest"] = r.wer_guest ? py::cast(*r.wer_guest) : py::none();
  d["wer_host"] = r.wer_host ? py::cast(*r.wer_host) : py::none();
  return d;
}

py::dict ppl_dict(const PerplexityReport& r) {
  py::dict d;
  d["ppl"] = r.ppl();
  d["log_likelihood"] = r.log_likelihood;
  d["count"] = r.count;
  d["oov"] = r.oov;
  d["sentences"] = r.sentences;
  return d;
}

struct TrainedModel {
  TrainedGan gan;
  TranslationLexicon lex;
  std::optional<PosLexicon> pos;
};

}  // namespace

PYBIND11_MODULE(_csgan, m) {
  m.doc() = "Code-switching text generation toolkit (native core)";
  m.attr("__version__") = kVersion;

  auto base = py::register_exception<Error>(m, "CsganError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<LifecycleError>(m, "LifecycleError", base);
  py::register_exception<RealizationError>(m, "RealizationError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<AlignmentError>(m, "AlignmentError", base);

  py::class_<Corpus>(m, "Corpus", "Sentences of language-tagged tokens")
      .def(py::init(&corpus_from_lines), py::arg("lines"), "Build from lines in the corpus text format")
      .def_static("from_text", &corpus_from_text, py::arg("text"))
      .def_static("from_file", [](const std::string& p) { return parse_corpus_file(p).corpus; }, py::arg("path"))
      .def("__len__", &Corpus::size)
      .def("lines", &corpus_lines, "Lines in the explicit word|h / word|g format")
      .def("tokens", [](const Corpus& c) {
        std::vector<std::vector<std::string>> out;
        for (const auto& s : c.sentences) {
          out.emplace_back();
          for (const auto& t : s.tokens) out.back().push_back(t.surface);
        }
        return out;
      })
      .def("cs_rate", [](const Corpus& c) { return cs_rate(c); })
      .def("stats", [](const Corpus& c) {
        auto s = corpus_stats(c);
        py::dict d;
        d["utterances"] = s.total_utterances;
        d["host_utterances"] = s.host_utterances;
        d["cs_utterances"] = s.cs_utterances;
        d["guest_utterances"] = s.guest_utterances;
        d["words"] = s.total_words;
        d["host_words"] = s.host_words;
        d["guest_words"] = s.guest_words;
        d["cs_rate"] = s.cs_rate ? py::cast(*s.cs_rate) : py::none();
        return d;
      })
      .def("save", [](const Corpus& c, const std::string& p) { write_corpus_file(p, c); }, py::arg("path"));

  py::class_<TranslationLexicon>(m, "Lexicon", "Host word to guest translation table")
      .def_static("from_text", [](const std::string& t) {
        std::istringstream in(t);
        return load_lexicon(in).lexicon;
      }, py::arg("text"))
      .def_static("from_file", [](const std::string& p) { return load_lexicon_file(p).lexicon; }, py::arg("path"))
      .def("__len__", &TranslationLexicon::size)
      .def("coverage", [](const TranslationLexicon& l, const Corpus& c) { return coverage(l, c); })
      .def("switchable", [](const TranslationLexicon& l, const std::string& line) {
        return switchable_positions(parse_sentence(line), l);
      }, py::arg("line"))
      .def("realize", [](const TranslationLexicon& l, const std::string& line, const std::vector<bool>& mask) {
        return sentence_line(realize(parse_sentence(line), mask_of(mask), l));
      }, py::arg("line"), py::arg("mask"));

  py::class_<PosLexicon>(m, "PosLexicon", "Host word to POS tag table over a closed tag set")
      .def_static("from_files", [](const std::string& lex, const std::string& tagset) {
        return load_pos_lexicon_file(lex, load_tagset_file(tagset));
      }, py::arg("path"), py::arg("tagset_path"));

  m.def("apply_baseline",
        [](const std::string& name, const Corpus& hosts, const TranslationLexicon& lex, double p, std::uint64_t seed,
           const PosLexicon* pos) {
          auto strategy = BaselineStrategy::parse(name, p);
          std::mt19937_64 rng(derive_seed(seed, "baseline." + strategy.name()));
          Corpus out;
          for (const auto& x : hosts.sentences) out.sentences.push_back(apply_baseline(strategy, x, lex, pos, rng).sentence);
          return out;
        },
        py::arg("name"), py::arg("hosts"), py::arg("lexicon"), py::arg("p") = 0.0, py::arg("seed") = 1,
        py::arg("pos") = nullptr, "Rule baseline: zh, en, random or noun");

  m.def("levenshtein", [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return levenshtein(a, b);
  }, py::arg("a"), py::arg("b"));
  m.def("bleu1", [](const std::string& ref, const std::string& hyp) {
    return bleu1(parse_sentence(ref), parse_sentence(hyp));
  }, py::arg("reference"), py::arg("hypothesis"));
  m.def("wer", [](const Corpus& refs, const Corpus& hyps) { return wer(refs.sentences, hyps.sentences); },
        py::arg("references"), py::arg("hypotheses"));
  m.def("evaluate", [](const Corpus& refs, const Corpus& hyps) {
    return report_dict(evaluate(refs.sentences, hyps.sentences));
  }, py::arg("references"), py::arg("hypotheses"), "CSP precision/recall/F, BLEU-1 and WER rows");

  py::class_<KnTrigram>(m, "KneserNey", "Interpolated Kneser-Ney trigram model")
      .def(py::init([](const Corpus& c) { return train_kn(c); }), py::arg("corpus"))
      .def("prob", [](const KnTrigram& k, const std::string& w, const std::string& u, const std::string& v) {
        const auto& voc = k.vocab();
        return k.prob(voc.id(w), voc.id(u), voc.id(v));
      }, py::arg("word"), py::arg("u"), py::arg("v"), "P(word | u v) over surface strings")
      .def("perplexity", [](const KnTrigram& k, const Corpus& c) { return ppl_dict(ngram_ppl(k, c)); });

  m.def("train_char_lm",
        [](const Corpus& train, std::optional<Corpus> dev, const std::string& config) {
          auto cfg = config_of(config).charlm;
          return train_char_lstm(train, dev ? &*dev : nullptr, cfg).model;
        },
        py::arg("train"), py::arg("dev") = py::none(), py::arg("config") = "",
        "Character LSTM; `config` is INI text whose [charlm] section overrides defaults");
  py::class_<CharLstmModel>(m, "CharLM")
      .def("perplexity", [](const CharLstmModel& lm, const Corpus& c) { return ppl_dict(char_lstm_ppl(lm, c)); });

  py::class_<TrainedModel>(m, "Generator", "Trained code-switching generator")
      .def("history", [](const TrainedModel& t) {
        std::vector<py::dict> out;
        for (const auto& e : t.gan.history) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["d_loss"] = e.d_loss;
          d["g_loss"] = e.g_loss;
          d["mean_reward"] = e.mean_reward;
          d["mean_switch_prob"] = e.mean_switch_prob;
          out.push_back(d);
        }
        return out;
      })
      .def("generate", [](const TrainedModel& t, const Corpus& hosts, const std::string& mode, std::uint64_t seed) {
        if (mode != "sample" && mode != "threshold") throw ConfigError("mode must be sample or threshold");
        auto gm = mode == "sample" ? GenerateMode::Sample : GenerateMode::Threshold;
        nn::Rng rng(derive_seed(seed, "generate"));
        Corpus out;
        const PosLexicon* pos = t.pos ? &*t.pos : nullptr;
        for (const auto& x : hosts.sentences)
          out.sentences.push_back(generate(t.gan.model, x, gm, t.lex, pos, rng).realized);
        return out;
      }, py::arg("hosts"), py::arg("mode") = "threshold", py::arg("seed") = 1)
      .def("save", [](const TrainedModel& t, const std::string& p) { nn::save_container(p, t.gan.model.to_container()); },
           py::arg("path"));

  m.def("train_gan",
        [](const Corpus& cs, const Corpus& hosts, const TranslationLexicon& lex, const PosLexicon* pos, bool use_pos,
           const std::string& config) {
          auto cfg = config_of(config);
          ExperimentData data;
          data.cs_train = cs;
          data.host_train = hosts;
          data.lex = lex;
          if (pos) data.pos = *pos;
          py::gil_scoped_release release;
          auto trained = train_proposed(data, cfg, use_pos);
          return TrainedModel{std::move(trained), lex, data.pos};
        },
        py::arg("cs"), py::arg("hosts"), py::arg("lexicon"), py::arg("pos") = nullptr, py::arg("use_pos") = false,
        py::arg("config") = "", "Adversarial training; `config` is INI text (seed and [gan] keys)");

  m.def("synth",
        [](std::size_t n, std::uint64_t seed, const std::string& rule_ini) {
          std::istringstream in(rule_ini);
          auto rule = make_rule(load_rule_spec(in));
          auto s = synth_corpus(rule, n, seed);
          std::vector<std::vector<bool>> masks;
          for (const auto& mk : s.masks) masks.push_back(mk.bits);
          return py::make_tuple(s.host, s.cs, masks, rule.lexicon(), rule.pos_lexicon());
        },
        py::arg("n"), py::arg("seed") = 1, py::arg("rule") = "",
        "Planted-rule corpus: (host, cs, masks, lexicon, pos_lexicon); `rule` is INI text with a [rule] section");

  m.def("run_experiment",
        [](int exp, const std::string& config, const std::string& output_dir) {
          auto cfg = config_of(config);
          if (!output_dir.empty()) cfg.paths.output_dir = output_dir;
          py::gil_scoped_release release;
          return run_experiment(exp, cfg, "python");
        },
        py::arg("exp"), py::arg("config") = "", py::arg("output_dir") = "",
        "Runs experiment 1, 2 or 3 and returns the written file paths");

  m.def("derive_seed", [](std::uint64_t base, const std::string& label) { return derive_seed(base, label); });
}
