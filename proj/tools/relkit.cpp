#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "relkit/relkit.hpp"

namespace {

// Mirrors the loss trace to stdout while the canonical copy goes to disk.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int c) override {
    if (c == EOF) return !EOF;
    const int r1 = a_->sputc(static_cast<char>(c));
    const int r2 = b_->sputc(static_cast<char>(c));
    return r1 == EOF || r2 == EOF ? EOF : c;
  }

  int sync() override { return a_->pubsync() == 0 && b_->pubsync() == 0 ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

struct CommonOpts {
  std::string data;
  std::string config_path;
  std::string checkpoint;
  std::string out;
  std::string profile;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<int> threads;
};

relkit::TrainConfig resolve_config(const CommonOpts& opts) {
  relkit::TrainConfig cfg;
  if (!opts.profile.empty()) cfg.apply_profile(opts.profile);
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path, std::ios::binary);
    if (!in) throw relkit::Error("config: cannot open " + opts.config_path);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw relkit::ParseError("config: " + opts.config_path + ": " + e.what());
    }
    cfg.apply_json(doc);
  }
  for (const std::string& assignment : opts.overrides) cfg.apply_override(assignment);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.threshold) cfg.threshold = *opts.threshold;
  if (opts.threads) cfg.threads = *opts.threads;
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw relkit::Error("cannot open " + path + " for writing");
  out << text;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
}

int run_analyze(const CommonOpts& opts) {
  const auto corpus = relkit::load_corpus(opts.data);
  const relkit::CorpusStats stats = relkit::corpus_stats(corpus);
  if (stats.zero_triplet > 0) {
    std::cerr << "warning: " << stats.zero_triplet
              << " sample(s) with zero triplets counted as Single\n";
  }
  emit(opts.out, relkit::format_stats_tsv(stats));
  return 0;
}

int run_synth(const CommonOpts& opts) {
  const relkit::TrainConfig cfg = resolve_config(opts);
  const auto corpus = relkit::synth_generate(cfg.synth());
  if (opts.out.empty()) throw relkit::Error("synth: --out is required");
  relkit::write_corpus(opts.out, corpus);
  std::cout << "wrote " << corpus.size() << " samples to " << opts.out << "\n";
  return 0;
}

int run_train(const CommonOpts& opts) {
  const relkit::TrainConfig cfg = resolve_config(opts);
  const auto corpus = relkit::load_corpus(opts.data);
  const relkit::Vocab vocab = relkit::Vocab::from_tokens(relkit::collect_tokens(corpus));
  const relkit::RelationSchema schema(relkit::collect_relations(corpus));

  relkit::Model model(cfg, vocab, schema);
  model.init_params(cfg.seed);

  const std::string ckpt_path = opts.out.empty() ? "model.ckpt" : opts.out;
  const std::string trace_path = ckpt_path + ".trace";
  std::ofstream trace_file(trace_path, std::ios::binary);
  if (!trace_file) throw relkit::Error("train: cannot open " + trace_path + " for writing");
  TeeBuf tee(trace_file.rdbuf(), std::cout.rdbuf());
  std::ostream trace(&tee);

  const relkit::TrainResult result = relkit::train(model, corpus, &trace);
  relkit::save_checkpoint(ckpt_path, model, result.steps);
  vocab.save(ckpt_path + ".vocab");
  std::cout << "saved checkpoint to " << ckpt_path << " (" << model.params().element_count()
            << " parameters, " << result.steps << " steps)\n";
  return 0;
}

int run_eval(const CommonOpts& opts) {
  const relkit::Checkpoint ck = relkit::load_checkpoint(opts.checkpoint);
  const relkit::Model model = relkit::model_from_checkpoint(ck);
  const auto corpus = relkit::load_corpus(opts.data);
  const double threshold = opts.threshold.value_or(ck.config.threshold);
  const relkit::MetricsReport report = relkit::evaluate(model, corpus, threshold);
  emit(opts.out, relkit::format_metrics_tsv(report));
  return 0;
}

int run_predict(const CommonOpts& opts) {
  const relkit::Checkpoint ck = relkit::load_checkpoint(opts.checkpoint);
  const relkit::Model model = relkit::model_from_checkpoint(ck);
  const auto corpus = relkit::load_corpus(opts.data);
  const double threshold = opts.threshold.value_or(ck.config.threshold);
  std::ostringstream os;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (const relkit::TripletPrediction& pred : model.predict(corpus[i], threshold)) {
      nlohmann::json rec{{"sample", i},
                         {"relation", model.schema().name(pred.relation)},
                         {"head", pred.head},
                         {"tail", pred.tail},
                         {"probability", pred.probability}};
      os << rec.dump() << "\n";
    }
  }
  emit(opts.out, os.str());
  return 0;
}

int run_gradcheck(const CommonOpts& opts) {
  const std::uint64_t seed = opts.seed.value_or(42);
  bool all_passed = true;
  for (const relkit::NamedGradCheck& check : relkit::run_standard_gradchecks(seed)) {
    const auto& r = check.report;
    std::cout << check.name << "\tparams=" << r.entries.size() << "\tmax_rel_err="
              << std::scientific << std::setprecision(3) << r.worst() << "\ttol="
              << r.tolerance << "\t" << (r.passed() ? "PASS" : "FAIL") << "\n";
    std::cout.unsetf(std::ios::scientific);
    all_passed = all_passed && r.passed();
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relation-extraction trainer: bilinear token-pair scoring over a micro-transformer"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&opts](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON config file");
    sub->add_option("--profile", opts.profile, "preset: semeval|nyt|webnlg");
    sub->add_option("--set", opts.overrides, "config override key=value (repeatable)");
    sub->add_option("--seed", opts.seed, "RNG seed");
    sub->add_option("--threshold", opts.threshold, "decision threshold in (0,1)");
    sub->add_option("--threads", opts.threads, "worker threads for training");
    sub->add_option("--out", opts.out, "output path");
  };

  CLI::App* analyze = app.add_subcommand("analyze", "corpus complexity statistics");
  analyze->add_option("--data", opts.data, "corpus file (JSON lines)")->required();
  add_common(analyze);

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_common(synth);

  CLI::App* train = app.add_subcommand("train", "train a model and save a checkpoint");
  train->add_option("--data", opts.data, "corpus file (JSON lines)")->required();
  add_common(train);

  CLI::App* eval = app.add_subcommand("eval", "per-bucket micro-P/R/F1 report");
  eval->add_option("--data", opts.data, "corpus file (JSON lines)")->required();
  eval->add_option("--checkpoint", opts.checkpoint, "checkpoint file")->required();
  add_common(eval);

  CLI::App* predict = app.add_subcommand("predict", "emit triplets with probabilities");
  predict->add_option("--data", opts.data, "corpus file (JSON lines; triplets may be empty)")
      ->required();
  predict->add_option("--checkpoint", opts.checkpoint, "checkpoint file")->required();
  add_common(predict);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient report");
  add_common(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*analyze) return run_analyze(opts);
    if (*synth) return run_synth(opts);
    if (*train) return run_train(opts);
    if (*eval) return run_eval(opts);
    if (*predict) return run_predict(opts);
    if (*gradcheck) return run_gradcheck(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
