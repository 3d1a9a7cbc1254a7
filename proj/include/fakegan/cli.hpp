#pragma once

// Command-line front end. `cli_dispatch` parses the arguments (without the
// program name), runs one subcommand and returns the process exit status:
// 0 success, 1 contract error or usage error, 2 I/O error.

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>
#include <tuple>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fakegan/checkpoint.hpp"
#include "fakegan/config.hpp"
#include "fakegan/gradcheck_suite.hpp"
#include "fakegan/metrics.hpp"
#include "fakegan/synth.hpp"
#include "fakegan/trainer.hpp"

namespace fakegan {

namespace cli {

namespace fs = std::filesystem;

// Where a training command gets its corpus from.
struct DataOptions {
  std::string corpus;     // cached corpus (from `ingest` or `synth gen`)
  std::string data;       // dataset root with truthful/ and deceptive/
  std::string synthetic;  // source pair JSON, or "default"
  std::size_t per_class = 500;
  std::uint64_t data_seed = 7;
};

struct ConfigOptions {
  std::string path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_iterations;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> sequence_length;
  std::optional<std::size_t> k_folds;
};

inline void add_config_options(CLI::App* app, ConfigOptions& c) {
  app->add_option("--config", c.path, "JSON configuration file");
  app->add_option("--seed", c.seed, "Override the config seed");
  app->add_option("--max-iterations", c.max_iterations, "Override max adversarial iterations");
  app->add_option("--threads", c.threads, "Rollout worker threads");
  app->add_option("--length", c.sequence_length, "Override the sequence length L");
  app->add_option("--folds", c.k_folds, "Override k");
}

inline void add_data_options(CLI::App* app, DataOptions& d) {
  auto* g = app->add_option_group("data", "corpus source (exactly one)");
  g->add_option("--corpus", d.corpus, "Cached corpus JSON");
  g->add_option("--data", d.data, "Dataset root with truthful/ and deceptive/ subdirectories");
  g->add_option("--synthetic", d.synthetic, "Source pair JSON, or 'default' for the desk pair");
  g->require_option(1);
  app->add_option("--per-class", d.per_class, "Synthetic samples per class");
  app->add_option("--data-seed", d.data_seed, "Synthetic sampling seed");
}

inline TrainConfig resolve_config(const ConfigOptions& c) {
  TrainConfig cfg = c.path.empty() ? TrainConfig{} : load_config(c.path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.max_iterations) cfg.max_iterations = *c.max_iterations;
  if (c.threads) cfg.threads = *c.threads;
  if (c.sequence_length) cfg.sequence_length = *c.sequence_length;
  if (c.k_folds) cfg.k_folds = *c.k_folds;
  cfg.validate();
  return cfg;
}

inline SourcePair resolve_pair(const std::string& spec) {
  return spec == "default" ? default_desk_pair() : load_source_pair(spec);
}

inline LabeledCorpus resolve_corpus(const DataOptions& d, const TrainConfig& cfg) {
  LabeledCorpus c;
  if (!d.corpus.empty()) {
    c = load_corpus(d.corpus);
  } else if (!d.data.empty()) {
    c = ingest_labeled_dir(d.data, cfg.sequence_length).corpus;
  } else {
    c = sample_corpus(resolve_pair(d.synthetic), d.per_class, d.data_seed, cfg.sequence_length);
  }
  if (c.sequence_length != cfg.sequence_length) {
    throw ContractError("corpus sequence length " + std::to_string(c.sequence_length) +
                        " differs from config " + std::to_string(cfg.sequence_length));
  }
  return c;
}

// Fold 0 of the configured k-fold split serves as the held-out set for
// single runs.
inline Fold holdout_split(const LabeledCorpus& c, const TrainConfig& cfg) {
  return kfold_split(c, cfg.k_folds, cfg.seed).front();
}

// Output goes to `<dir>.partial` first and is renamed into place only when
// the command succeeds, so failed runs leave nothing behind.
class StagedDir {
 public:
  explicit StagedDir(fs::path target) : target_(std::move(target)) {
    if (target_.empty()) throw ContractError("--out is required");
    if (fs::exists(target_) && !fs::is_directory(target_)) {
      throw IoError(target_.string() + " exists and is not a directory");
    }
    staging_ = target_;
    staging_ += ".partial";
  }
  ~StagedDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(staging_, ec);
  }
  const fs::path& path() {
    if (!created_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
      if (!fs::create_directories(staging_, ec) || ec) {
        throw IoError("cannot create " + staging_.string());
      }
      created_ = true;
    }
    return staging_;
  }
  void commit() {
    path();
    std::error_code ec;
    if (fs::exists(target_)) fs::remove_all(target_, ec);
    fs::rename(staging_, target_, ec);
    if (ec) throw IoError("cannot move results into " + target_.string() + ": " + ec.message());
    committed_ = true;
  }

 private:
  fs::path target_, staging_;
  bool created_ = false, committed_ = false;
};

inline std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "n/a"; }

inline void print_summary(std::ostream& out, const TrainResult& r) {
  out << "pretrain_d_acc=" << fmt(r.pretrain_accuracy) << " best_d_acc=" << fmt(r.best_accuracy)
      << " best_iteration=" << r.best_iteration << " iterations=" << r.iterations
      << " converged=" << (r.converged ? "yes" : "no") << "\n";
}

inline void print_report(std::ostream& out, const MetricsReport& m) {
  out << "fold=" << m.fold << " accuracy=" << fmt(m.accuracy) << " tp=" << m.tp << " fp=" << m.fp
      << " tn=" << m.tn << " fn=" << m.fn;
  for (const ClassMetrics* c : {&m.positive_class, &m.negative_class}) {
    out << " precision[" << to_string(c->label) << "]=" << fmt(c->precision) << " recall["
        << to_string(c->label) << "]=" << fmt(c->recall);
  }
  out << "\n";
}

inline void print_summary_line(std::ostream& out, const char* name,
                               const std::optional<Summary>& s) {
  out << name << "=";
  if (s) out << fmt(s->mean) << "+-" << fmt(s->std);
  else out << "n/a";
  out << "\n";
}

inline std::vector<fs::path> review_files(const fs::path& target) {
  std::error_code ec;
  if (fs::is_regular_file(target, ec)) return {target};
  if (!fs::is_directory(target, ec)) throw IoError("cannot read " + target.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(target)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

// Reviews longer than the model's L are truncated for classification.
inline TokenSequence encode_for_inference(const std::string& text, const Vocabulary& vocab,
                                          std::size_t length) {
  std::vector<std::string> tokens = tokenize(text);
  if (tokens.size() > length) tokens.resize(length);
  return *encode(tokens, vocab, length);
}

}  // namespace cli

inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out,
                        std::ostream& err) {
  using namespace cli;
  CLI::App app{"Dual-discriminator sequence GAN for deceptive review detection", "fakegan"};
  app.require_subcommand(1);

  // ingest
  std::string ingest_root, ingest_out;
  ConfigOptions ingest_cfg;
  auto* ingest = app.add_subcommand("ingest", "Read a labeled review directory");
  ingest->add_option("root", ingest_root, "Dataset root")->required();
  ingest->add_option("--out", ingest_out, "Write the encoded corpus here");
  add_config_options(ingest, ingest_cfg);

  // pretrain / train / ablate / kfold / sweep-gd share data + config options
  DataOptions pre_data, train_data, ablate_data, kfold_data, sweep_data;
  ConfigOptions pre_cfg, train_cfg, ablate_cfg, kfold_cfg, sweep_cfg;
  std::string pre_out, train_out, ablate_out, ablate_mode, sweep_out;
  std::size_t sweep_gmax = 6, sweep_dmax = 6;
  auto* pre = app.add_subcommand("pretrain", "Pretrain G, D and D' only");
  auto* trn = app.add_subcommand("train", "Pretraining followed by adversarial training");
  auto* abl = app.add_subcommand("ablate", "Single-discriminator training variant");
  auto* kf = app.add_subcommand("kfold", "k-fold cross-validation of the full pipeline");
  auto* sweep = app.add_subcommand("sweep-gd", "Train over a grid of (g, d) settings");
  for (auto [sub, data, cfg] : {std::tuple{pre, &pre_data, &pre_cfg},
                                std::tuple{trn, &train_data, &train_cfg},
                                std::tuple{abl, &ablate_data, &ablate_cfg},
                                std::tuple{kf, &kfold_data, &kfold_cfg},
                                std::tuple{sweep, &sweep_data, &sweep_cfg}}) {
    add_data_options(sub, *data);
    add_config_options(sub, *cfg);
  }
  pre->add_option("--out", pre_out, "Output directory")->required();
  trn->add_option("--out", train_out, "Output directory")->required();
  abl->add_option("--out", ablate_out, "Output directory")->required();
  abl->add_option("--mode", ablate_mode, "d-only-truthful-pretrain | d-only-deceptive-pretrain")
      ->required();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--g-max", sweep_gmax, "Largest g in the grid");
  sweep->add_option("--d-max", sweep_dmax, "Largest d in the grid");

  // classify
  std::string classify_target, classify_model;
  ConfigOptions classify_cfg;
  auto* cls = app.add_subcommand("classify", "Label reviews with a trained D");
  cls->add_option("target", classify_target, "Review file or directory of .txt files")->required();
  cls->add_option("--model", classify_model, "D checkpoint")->required();
  add_config_options(cls, classify_cfg);

  // synth
  auto* synth = app.add_subcommand("synth", "Synthetic Markov source utilities");
  synth->require_subcommand(1);
  std::string gen_pair = "default", gen_out, bayes_pair = "default", pair_out;
  std::size_t gen_n = 500, bayes_n = 20000;
  std::uint64_t gen_seed = 7, bayes_seed = 11;
  ConfigOptions gen_cfg, bayes_cfg, pair_cfg;
  auto* sgen = synth->add_subcommand("gen", "Sample a labeled corpus from a source pair");
  sgen->add_option("--pair", gen_pair, "Source pair JSON or 'default'");
  sgen->add_option("--per-class", gen_n, "Samples per class");
  sgen->add_option("--data-seed", gen_seed, "Sampling seed");
  sgen->add_option("--out", gen_out, "Corpus JSON output")->required();
  add_config_options(sgen, gen_cfg);
  auto* sbayes = synth->add_subcommand("bayes", "Bayes-optimal accuracy of a source pair");
  sbayes->add_option("--pair", bayes_pair, "Source pair JSON or 'default'");
  sbayes->add_option("--n-eval", bayes_n, "Evaluation sample size");
  sbayes->add_option("--data-seed", bayes_seed, "Evaluation seed");
  add_config_options(sbayes, bayes_cfg);
  auto* spair = synth->add_subcommand("pair", "Write the default desk-scale source pair");
  spair->add_option("--out", pair_out, "Source pair JSON output")->required();
  add_config_options(spair, pair_cfg);

  // gradcheck
  std::size_t gc_seeds = 20;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  ConfigOptions gc_cfg;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gc->add_option("--seeds", gc_seeds, "Number of random seeds");
  gc->add_option("--eps", gc_eps, "Central difference step");
  gc->add_option("--tol", gc_tol, "Maximum relative error");
  add_config_options(gc, gc_cfg);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 1;
  }

  try {
    if (*ingest) {
      TrainConfig cfg = resolve_config(ingest_cfg);
      IngestResult r = ingest_labeled_dir(ingest_root, cfg.sequence_length);
      if (!ingest_out.empty()) save_corpus(ingest_out, r.corpus);
      out << "truthful=" << r.corpus.truthful.size() << " deceptive=" << r.corpus.deceptive.size()
          << "\n";
      err << "read truthful=" << r.truthful_read << " deceptive=" << r.deceptive_read
          << " vocabulary=" << r.corpus.vocab->size() << "\n";
    } else if (*pre) {
      TrainConfig cfg = resolve_config(pre_cfg);
      LabeledCorpus c = resolve_corpus(pre_data, cfg);
      Fold f = holdout_split(c, cfg);
      StagedDir dir(pre_out);
      AdversarialTrainer t(cfg, f.train, f.test);
      t.pretrain_all();
      Models& m = t.models();
      save_generator(dir.path() / "generator.ckpt", m.generator, *c.vocab);
      save_discriminator(dir.path() / "d.ckpt", m.d, *c.vocab);
      if (m.d_prime) save_discriminator(dir.path() / "d_prime.ckpt", *m.d_prime, *c.vocab);
      export_history(t.history(), dir.path() / "history.csv");
      dir.commit();
      out << "pretrain_d_acc=" << fmt(t.pretrain_accuracy()) << "\n";
    } else if (*trn || *abl) {
      TrainConfig cfg = resolve_config(*trn ? train_cfg : ablate_cfg);
      if (*abl) {
        cfg.mode = parse_mode(ablate_mode);
        if (cfg.mode == TrainMode::kFull) throw ContractError("ablate: --mode must not be full");
      }
      LabeledCorpus c = resolve_corpus(*trn ? train_data : ablate_data, cfg);
      Fold f = holdout_split(c, cfg);
      StagedDir dir(*trn ? train_out : ablate_out);
      AdversarialTrainer t(cfg, f.train, f.test);
      t.pretrain_all();
      TrainResult r = run_adversarial(t, dir.path() / "checkpoints");
      save_discriminator(dir.path() / "d.ckpt", r.best_d, *c.vocab);
      export_history(r.history, dir.path() / "history.csv");
      {
        std::ofstream cfg_out(dir.path() / "config.json");
        cfg_out << to_json(cfg).dump(2) << "\n";
        if (!cfg_out) throw IoError("cannot write config.json");
      }
      dir.commit();
      print_summary(out, r);
    } else if (*kf) {
      TrainConfig cfg = resolve_config(kfold_cfg);
      LabeledCorpus c = resolve_corpus(kfold_data, cfg);
      KFoldResult r = run_kfold(cfg, c);
      for (const auto& m : r.aggregate.folds) print_report(out, m);
      const FoldAggregate& a = r.aggregate;
      out << "accuracy=" << fmt(a.accuracy.mean) << "+-" << fmt(a.accuracy.std) << "\n";
      print_summary_line(out, "precision[deceptive]", a.positive_precision);
      print_summary_line(out, "recall[deceptive]", a.positive_recall);
      print_summary_line(out, "precision[truthful]", a.negative_precision);
      print_summary_line(out, "recall[truthful]", a.negative_recall);
    } else if (*sweep) {
      TrainConfig base = resolve_config(sweep_cfg);
      if (sweep_gmax < 1 || sweep_dmax < 1) throw ContractError("sweep-gd: grid bounds must be >= 1");
      LabeledCorpus c = resolve_corpus(sweep_data, base);
      Fold f = holdout_split(c, base);
      StagedDir dir(sweep_out);
      std::ofstream table(dir.path() / "sweep.csv");
      if (!table) throw IoError("cannot write sweep.csv");
      table << "g,d,pretrain_d_acc,best_d_acc,final_d_acc,iterations,converged\n";
      for (std::size_t g = 1; g <= sweep_gmax; ++g) {
        for (std::size_t d = 1; d <= sweep_dmax; ++d) {
          TrainConfig cfg = base;
          cfg.g_steps = g;
          cfg.d_steps = d;
          TrainResult r = train(cfg, f.train, f.test);
          const double last = r.history.empty() ? 0.0 : r.history.back().d_acc;
          table << g << ',' << d << ',' << detail::format_double(r.pretrain_accuracy) << ','
                << detail::format_double(r.best_accuracy) << ',' << detail::format_double(last)
                << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << "\n";
          export_history(r.history, dir.path() / ("history_g" + std::to_string(g) + "_d" +
                                                  std::to_string(d) + ".csv"));
          out << "g=" << g << " d=" << d << " ";
          print_summary(out, r);
        }
      }
      table.close();
      if (!table) throw IoError("write failed: sweep.csv");
      dir.commit();
    } else if (*cls) {
      resolve_config(classify_cfg);
      CheckpointData ck = read_checkpoint(classify_model);
      DiscriminatorParams d = discriminator_from_checkpoint(ck);
      if (d.role != Role::kD) throw ContractError("classify: checkpoint holds D', not D");
      auto vocab = checkpoint_vocabulary(ck);
      std::vector<std::string> lines;
      for (const fs::path& p : review_files(classify_target)) {
        TokenSequence s = encode_for_inference(detail::read_file(p), *vocab, d.sequence_length);
        const double sc = score(d, s);
        lines.push_back(p.string() + "\t" + to_string(classify(d, s)) + "\t" +
                        detail::format_double(sc));
      }
      for (const auto& l : lines) out << l << "\n";
    } else if (*synth) {
      if (*sgen) {
        TrainConfig cfg = resolve_config(gen_cfg);
        SourcePair pair = resolve_pair(gen_pair);
        save_corpus(gen_out, sample_corpus(pair, gen_n, gen_seed, cfg.sequence_length));
        out << "truthful=" << gen_n << " deceptive=" << gen_n << "\n";
      } else if (*sbayes) {
        resolve_config(bayes_cfg);
        out << "bayes_accuracy=" << detail::format_double(
                                        bayes_accuracy(resolve_pair(bayes_pair), bayes_n, bayes_seed))
            << "\n";
      } else if (*spair) {
        resolve_config(pair_cfg);
        save_source_pair(default_desk_pair(), pair_out);
      }
    } else if (*gc) {
      resolve_config(gc_cfg);
      std::vector<std::uint64_t> seeds;
      for (std::size_t s = 0; s < gc_seeds; ++s) seeds.push_back(s + 1);
      std::map<std::string, double> worst;
      std::vector<std::string> order;
      for (const auto& c : run_gradcheck_suite(seeds, gc_eps)) {
        if (!worst.count(c.name)) order.push_back(c.name);
        worst[c.name] = std::max(worst[c.name], c.max_relative_error);
      }
      bool ok = true;
      for (const auto& name : order) {
        const bool pass = worst[name] < gc_tol;
        ok = ok && pass;
        out << (pass ? "ok   " : "FAIL ") << name << " max_rel_err=" << std::scientific
            << std::setprecision(3) << worst[name] << std::defaultfloat << "\n";
      }
      out << (ok ? "all gradient checks passed" : "gradient checks failed") << "\n";
      return ok ? 0 : 1;
    }
    return 0;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const TrainingDivergedError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "io error: malformed JSON: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace fakegan
