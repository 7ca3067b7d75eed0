// Command-line front end: one subcommand per toolkit operation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "csgan/baselines.hpp"
#include "csgan/corpus.hpp"
#include "csgan/error.hpp"
#include "csgan/eval.hpp"
#include "csgan/gan.hpp"
#include "csgan/lexicon.hpp"
#include "csgan/lm.hpp"
#include "csgan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace csgan;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string format = "auto";
  bool drop_unclassifiable = false;
};

std::string g_command_line;

RunConfig run_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

FormatConfig format_of(const Common& c) {
  FormatConfig f;
  if (c.format == "infer") {
    f.mode = TagMode::Infer;
  } else if (c.format == "explicit") {
    f.mode = TagMode::Explicit;
  } else {
    f.mode = TagMode::Auto;
  }
  if (c.drop_unclassifiable) f.on_unclassifiable = UnclassifiablePolicy::DropToken;
  return f;
}

Corpus read_corpus(const std::string& path, const Common& c, CorpusRole role = CorpusRole::CsTraining) {
  return parse_corpus_file(path, format_of(c), role).corpus;
}

void ensure_parent(const std::string& path) {
  if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
}

std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

// Manifest next to an output file: <output>.manifest
void write_manifest(const std::string& output, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  Manifest m;
  m.add("command", g_command_line);
  m.add("subcommand", command);
  m.add("version", kVersion);
  m.add("seed", std::to_string(cfg.seed));
  m.add("output", output);
  for (const auto& [k, v] : extra) m.add(k, v);
  m.add_config(cfg);
  m.save(output + ".manifest");
}

std::optional<PosLexicon> read_pos(const std::string& pos_path, const std::string& tagset_path) {
  if (pos_path.empty()) return std::nullopt;
  if (tagset_path.empty()) throw ConfigError("--pos-lexicon requires --tagset");
  return load_pos_lexicon_file(pos_path, load_tagset_file(tagset_path));
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Run configuration (INI)");
  sub->add_option("--seed", c.seed, "Seed overriding the configuration");
  sub->add_option("--format", c.format, "Corpus token format")->check(CLI::IsMember({"auto", "infer", "explicit"}));
  sub->add_flag("--drop-unclassifiable", c.drop_unclassifiable, "Drop tokens in neither script instead of failing");
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) g_command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"Code-switching sentence generation toolkit"};
  app.require_subcommand(1);
  Common common;

  // ingest
  std::string in_path, out_path;
  auto* ingest = app.add_subcommand("ingest", "Parse a corpus and rewrite it with explicit language tags");
  add_common(ingest, common);
  ingest->add_option("--input", in_path)->required();
  ingest->add_option("--output", out_path)->required();

  // stats
  std::string corpus_path;
  bool stats_csv = false;
  auto* stats = app.add_subcommand("stats", "Utterance and word statistics with CS-rate");
  add_common(stats, common);
  stats->add_option("--corpus", corpus_path)->required();
  stats->add_option("--output", out_path);
  stats->add_flag("--csv", stats_csv, "Comma-separated table instead of key/value text");

  // clean
  std::vector<std::string> markers, patterns;
  double threshold = 0.3;
  auto* clean_cmd = app.add_subcommand("clean", "Remove noise markers and drop heavily damaged utterances");
  add_common(clean_cmd, common);
  clean_cmd->add_option("--corpus", corpus_path)->required();
  clean_cmd->add_option("--output", out_path)->required();
  clean_cmd->add_option("--marker", markers, "Exact surface to remove (repeatable)");
  clean_cmd->add_option("--pattern", patterns, "Regex matched against whole surfaces (repeatable)");
  clean_cmd->add_option("--threshold", threshold, "Drop an utterance when removed/total exceeds this");

  // train-gan
  std::string cs_path, host_path, lex_path, pos_path, tagset_path, history_path;
  bool use_pos = false;
  auto* train_gan = app.add_subcommand("train-gan", "Train the switch-mask generator adversarially");
  add_common(train_gan, common);
  train_gan->add_option("--cs", cs_path, "Code-switched training corpus")->required();
  train_gan->add_option("--host", host_path, "Host-monolingual training corpus")->required();
  train_gan->add_option("--lexicon", lex_path)->required();
  train_gan->add_option("--pos-lexicon", pos_path);
  train_gan->add_option("--tagset", tagset_path);
  train_gan->add_flag("--use-pos", use_pos, "Feed POS embeddings to the shared encoder");
  train_gan->add_option("--output", out_path, "Checkpoint path")->required();
  train_gan->add_option("--history", history_path, "Per-epoch loss log (CSV)");

  // generate
  std::string model_path, mode = "threshold";
  auto* generate_cmd = app.add_subcommand("generate", "Turn host sentences into code-switched ones");
  add_common(generate_cmd, common);
  generate_cmd->add_option("--model", model_path)->required();
  generate_cmd->add_option("--input", in_path)->required();
  generate_cmd->add_option("--lexicon", lex_path)->required();
  generate_cmd->add_option("--pos-lexicon", pos_path);
  generate_cmd->add_option("--tagset", tagset_path);
  generate_cmd->add_option("--mode", mode)->check(CLI::IsMember({"sample", "threshold"}));
  generate_cmd->add_option("--output", out_path)->required();

  // baseline
  std::string baseline_name;
  std::optional<double> p;
  auto* baseline = app.add_subcommand("baseline", "Apply a rule-based comparison generator");
  add_common(baseline, common);
  baseline->add_option("--baseline", baseline_name)->required()->check(CLI::IsMember({"zh", "en", "random", "noun"}));
  baseline->add_option("--p", p, "Switch probability for random (default: CS-rate of --cs)");
  baseline->add_option("--cs", cs_path, "Corpus whose CS-rate sets the random p");
  baseline->add_option("--input", in_path)->required();
  baseline->add_option("--lexicon", lex_path)->required();
  baseline->add_option("--pos-lexicon", pos_path);
  baseline->add_option("--tagset", tagset_path);
  baseline->add_option("--output", out_path)->required();

  // train-lm
  std::string lm_type, dev_path;
  auto* train_lm = app.add_subcommand("train-lm", "Train a KN trigram or character LSTM language model");
  add_common(train_lm, common);
  train_lm->add_option("--type", lm_type)->required()->check(CLI::IsMember({"ngram", "char"}));
  train_lm->add_option("--corpus", corpus_path)->required();
  train_lm->add_option("--dev", dev_path, "Dev corpus for early stopping (char only)");
  train_lm->add_option("--output", out_path)->required();
  train_lm->add_option("--history", history_path, "Per-epoch PPL log (char only)");

  // ppl
  auto* ppl = app.add_subcommand("ppl", "Score a corpus with a trained language model");
  add_common(ppl, common);
  ppl->add_option("--type", lm_type)->required()->check(CLI::IsMember({"ngram", "char"}));
  ppl->add_option("--model", model_path)->required();
  ppl->add_option("--corpus", corpus_path)->required();
  ppl->add_option("--output", out_path);

  // eval-csp
  std::string ref_path, hyp_path, method = "system";
  auto* eval_csp = app.add_subcommand("eval-csp", "Switch-point P/R/F, BLEU-1 and WER against references");
  add_common(eval_csp, common);
  eval_csp->add_option("--reference", ref_path)->required();
  eval_csp->add_option("--hypothesis", hyp_path)->required();
  eval_csp->add_option("--method", method, "Row label");
  eval_csp->add_option("--output", out_path);

  // augment
  std::size_t per_sentence = 1;
  std::string report_path;
  auto* augment_cmd = app.add_subcommand("augment", "Append generated sentences to a CS training corpus");
  add_common(augment_cmd, common);
  augment_cmd->add_option("--cs", cs_path)->required();
  augment_cmd->add_option("--host", host_path)->required();
  augment_cmd->add_option("--lexicon", lex_path)->required();
  augment_cmd->add_option("--pos-lexicon", pos_path);
  augment_cmd->add_option("--tagset", tagset_path);
  auto* aug_model = augment_cmd->add_option("--model", model_path, "GAN checkpoint");
  auto* aug_base = augment_cmd->add_option("--baseline", baseline_name)->check(CLI::IsMember({"zh", "en", "random", "noun"}));
  aug_model->excludes(aug_base);
  augment_cmd->add_option("--p", p);
  augment_cmd->add_option("--mode", mode)->check(CLI::IsMember({"sample", "threshold"}));
  augment_cmd->add_option("--per-sentence", per_sentence);
  augment_cmd->add_option("--output", out_path)->required();

  // synth
  std::string rule_path, out_dir;
  std::size_t n = 100;
  auto* synth = app.add_subcommand("synth", "Write a planted-rule corpus with lexicons and gold masks");
  add_common(synth, common);
  synth->add_option("--rule", rule_path, "Rule specification (INI, [rule] section)");
  synth->add_option("--n", n)->required();
  synth->add_option("--output-dir", out_dir)->required();

  // experiment
  int exp = 0;
  auto* experiment = app.add_subcommand("experiment", "Run one of the three experiment harnesses");
  add_common(experiment, common);
  experiment->add_option("--exp", exp)->required()->check(CLI::Range(1, 3));
  experiment->add_option("--output-dir", out_dir, "Overrides paths.output_dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (const auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return 2;
  }

  try {
    RunConfig cfg = run_config(common);

    if (ingest->parsed()) {
      auto r = parse_corpus_file(in_path, format_of(common));
      auto out = open_out(out_path);
      write_corpus(out, r.corpus);
      std::cout << "sentences\t" << r.corpus.size() << "\ndropped_tokens\t" << r.dropped_tokens << '\n';
      write_manifest(out_path, "ingest", cfg, {{"input", in_path}});
    } else if (stats->parsed()) {
      auto report = corpus_stats(read_corpus(corpus_path, common));
      std::ostringstream text;
      if (stats_csv) {
        write_stats_csv(text, {{fs::path(corpus_path).filename().string(), report}});
      } else {
        write_stats_text(text, report);
      }
      std::cout << text.str();
      if (!out_path.empty()) {
        open_out(out_path) << text.str();
        write_manifest(out_path, "stats", cfg, {{"corpus", corpus_path}});
      }
    } else if (clean_cmd->parsed()) {
      CleaningConfig cc{markers, patterns, threshold};
      auto r = clean(read_corpus(corpus_path, common), cc);
      auto out = open_out(out_path);
      write_corpus(out, r.corpus);
      std::cout << "removed_tokens\t" << r.removed_tokens << "\ndropped_utterances\t" << r.dropped_utterances << '\n';
      write_manifest(out_path, "clean", cfg, {{"corpus", corpus_path}});
    } else if (train_gan->parsed()) {
      auto d_cs = read_corpus(cs_path, common);
      auto d_zh = read_corpus(host_path, common, CorpusRole::HostMonolingual);
      auto lex = load_lexicon_file(lex_path).lexicon;
      auto pos = read_pos(pos_path, tagset_path);
      if (use_pos && !pos) throw ConfigError("--use-pos requires --pos-lexicon and --tagset");
      GanArch arch = cfg.arch;
      arch.use_pos = use_pos;
      GanModel model(build_gan_vocab(d_cs, d_zh, lex, cfg.vocab_max), pos ? pos->tags() : TagSet(), arch,
                     derive_seed(cfg.seed, "gan.init"));
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(cfg.seed, "gan.train");
      auto history = train(model, d_cs, d_zh, lex, pos ? &*pos : nullptr, tc);
      ensure_parent(out_path);
      nn::save_container(out_path, model.to_container());
      if (!history_path.empty()) {
        auto h = open_out(history_path);
        write_history_csv(h, history);
      }
      write_manifest(out_path, "train-gan", cfg,
                     {{"cs", cs_path}, {"host", host_path}, {"lexicon", lex_path}, {"use_pos", use_pos ? "1" : "0"}});
    } else if (generate_cmd->parsed()) {
      auto model = GanModel::from_container(nn::load_container(model_path));
      auto lex = load_lexicon_file(lex_path).lexicon;
      auto pos = read_pos(pos_path, tagset_path);
      auto hosts = read_corpus(in_path, common, CorpusRole::HostMonolingual);
      nn::Rng rng(derive_seed(cfg.seed, "generate"));
      Corpus out_corpus;
      auto gen_mode = mode == "sample" ? GenerateMode::Sample : GenerateMode::Threshold;
      for (const auto& x : hosts.sentences)
        out_corpus.sentences.push_back(
            generate(model, x, gen_mode, lex, pos ? &*pos : nullptr, rng, cfg.train.noise).realized);
      auto out = open_out(out_path);
      write_corpus(out, out_corpus);
      write_manifest(out_path, "generate", cfg, {{"model", model_path}, {"input", in_path}, {"mode", mode}});
    } else if (baseline->parsed()) {
      auto lex = load_lexicon_file(lex_path).lexicon;
      auto pos = read_pos(pos_path, tagset_path);
      double prob = 0.0;
      if (baseline_name == "random") {
        if (p) {
          prob = *p;
        } else if (!cs_path.empty()) {
          prob = cs_rate(read_corpus(cs_path, common));
        } else {
          throw ConfigError("random baseline needs --p or --cs");
        }
      }
      auto strategy = BaselineStrategy::parse(baseline_name, prob);
      auto hosts = read_corpus(in_path, common, CorpusRole::HostMonolingual);
      nn::Rng rng(derive_seed(cfg.seed, "baseline." + baseline_name));
      Corpus out_corpus;
      std::size_t missing = 0;
      for (const auto& x : hosts.sentences) {
        auto r = apply_baseline(strategy, x, lex, pos ? &*pos : nullptr, rng);
        missing += r.missing;
        out_corpus.sentences.push_back(std::move(r.sentence));
      }
      auto out = open_out(out_path);
      write_corpus(out, out_corpus);
      std::cout << "untranslatable\t" << missing << '\n';
      write_manifest(out_path, "baseline", cfg,
                     {{"baseline", baseline_name}, {"p", std::to_string(prob)}, {"input", in_path}});
    } else if (train_lm->parsed()) {
      auto text = read_corpus(corpus_path, common);
      if (lm_type == "ngram") {
        auto kn = train_kn(text);
        for (int order : kn.fallback_orders())
          std::cerr << "warning: order " << order << " lacks count-of-counts; discount "
                    << KnTrigram::kFallbackDiscount << '\n';
        auto out = open_out(out_path);
        kn.write(out);
      } else {
        std::optional<Corpus> dev;
        if (!dev_path.empty()) dev = read_corpus(dev_path, common, CorpusRole::Dev);
        CharLmConfig cc = cfg.charlm;
        cc.seed = derive_seed(cfg.seed, "charlm");
        auto trained = train_char_lstm(text, dev ? &*dev : nullptr, cc);
        ensure_parent(out_path);
      nn::save_container(out_path, trained.model.to_container());
        if (!history_path.empty()) {
          auto h = open_out(history_path);
          h << "epoch,train_ppl,dev_ppl\n";
          for (const auto& e : trained.history)
            h << e.epoch << ',' << e.train_ppl << ',' << (e.dev_ppl ? std::to_string(*e.dev_ppl) : "undefined")
              << '\n';
        }
        std::cout << "best_epoch\t" << trained.best_epoch << '\n';
      }
      write_manifest(out_path, "train-lm", cfg, {{"type", lm_type}, {"corpus", corpus_path}, {"dev", dev_path}});
    } else if (ppl->parsed()) {
      auto text = read_corpus(corpus_path, common);
      PerplexityReport r;
      if (lm_type == "ngram") {
        std::ifstream in(model_path);
        if (!in) throw ConfigError("cannot open model '" + model_path + "'");
        r = ngram_ppl(KnTrigram::read(in), text);
      } else {
        r = char_lstm_ppl(CharLstmModel::from_container(nn::load_container(model_path)), text);
      }
      std::ostringstream report;
      write_ppl_text(report, r);
      std::cout << report.str();
      if (!out_path.empty()) {
        open_out(out_path) << report.str();
        write_manifest(out_path, "ppl", cfg, {{"type", lm_type}, {"model", model_path}, {"corpus", corpus_path}});
      }
    } else if (eval_csp->parsed()) {
      auto refs = read_corpus(ref_path, common, CorpusRole::Test);
      auto hyps = read_corpus(hyp_path, common);
      auto report = evaluate(refs.sentences, hyps.sentences);
      std::ostringstream table;
      write_metric_header(table);
      write_metric_row(table, method, report);
      std::cout << table.str();
      if (!out_path.empty()) {
        open_out(out_path) << table.str();
        write_manifest(out_path, "eval-csp", cfg, {{"reference", ref_path}, {"hypothesis", hyp_path}});
      }
    } else if (augment_cmd->parsed()) {
      auto d_cs = read_corpus(cs_path, common);
      auto hosts = read_corpus(host_path, common, CorpusRole::HostMonolingual);
      auto lex = load_lexicon_file(lex_path).lexicon;
      auto pos = read_pos(pos_path, tagset_path);
      const PosLexicon* pos_ptr = pos ? &*pos : nullptr;
      std::optional<GanModel> model;
      SentenceGenerator gen;
      std::string strategy;
      if (!model_path.empty()) {
        model = GanModel::from_container(nn::load_container(model_path));
        gen = gan_generator(*model, mode == "sample" ? GenerateMode::Sample : GenerateMode::Threshold, lex, pos_ptr,
                            cfg.train.noise);
        strategy = "gan:" + model_path;
      } else if (!baseline_name.empty()) {
        double prob = baseline_name == "random" ? (p ? *p : cs_rate(d_cs)) : 0.0;
        gen = baseline_generator(BaselineStrategy::parse(baseline_name, prob), lex, pos_ptr);
        strategy = baseline_name;
      } else {
        throw ConfigError("augment needs --model or --baseline");
      }
      auto seed = derive_seed(cfg.seed, "augment");
      auto a = augment(d_cs, hosts, gen, strategy, seed, per_sentence);
      auto out = open_out(out_path);
      write_corpus(out, a.corpus);
      auto report = open_out(out_path + ".report");
      write_augment_report(report, a);
      write_manifest(out_path, "augment", cfg, {{"strategy", strategy}, {"augment_seed", std::to_string(seed)}});
    } else if (synth->parsed()) {
      RuleSpec spec = rule_path.empty() ? cfg.rule : load_rule_spec_file(rule_path);
      auto rule = make_rule(spec);
      auto s = synth_corpus(rule, n, cfg.seed);
      fs::create_directories(out_dir);
      auto at = [&](const char* name) { return (fs::path(out_dir) / name).string(); };
      {
        auto o = open_out(at("host.txt"));
        write_corpus(o, s.host);
      }
      {
        auto o = open_out(at("cs.txt"));
        write_corpus(o, s.cs);
      }
      {
        auto o = open_out(at("masks.txt"));
        write_masks(o, s.masks);
      }
      {
        auto o = open_out(at("lexicon.tsv"));
        write_lexicon(o, rule.lexicon());
      }
      {
        auto o = open_out(at("pos.tsv"));
        write_pos_lexicon(o, rule.pos_lexicon());
      }
      {
        auto o = open_out(at("tagset.txt"));
        write_tagset(o, rule.tagset());
      }
      {
        auto o = open_out(at("rule.ini"));
        write_rule_spec(o, spec);
      }
      write_manifest(at("cs.txt"), "synth", cfg, {{"rule", rule_path}, {"n", std::to_string(n)}});
    } else if (experiment->parsed()) {
      if (!out_dir.empty()) cfg.paths.output_dir = out_dir;
      for (const auto& f : run_experiment(exp, cfg, g_command_line)) std::cout << f << '\n';
    }
  } catch (const csgan::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 1;
  } catch (const csgan::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const csgan::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
