// Minimal library walkthrough: generate a toy corpus, train a model, score
// it, and decode a few triplets, all in-process.
//
//   cmake --build build --target demo_train_toy
//   ./build/demos/demo_train_toy

#include <iostream>

#include "relkit/relkit.hpp"

int main() {
  relkit::TrainConfig cfg;
  cfg.hidden = 32;
  cfg.heads = 4;
  cfg.max_epochs = 20;
  cfg.synth_samples = 80;
  cfg.synth_vocab = 60;
  cfg.synth_relations = 3;
  cfg.synth_mix = {{"normal", 0.5}, {"epo", 0.5}};

  const auto corpus = relkit::synth_generate(cfg.synth());
  std::cout << relkit::format_stats_tsv(relkit::corpus_stats(corpus)) << "\n";

  relkit::Model model(cfg, relkit::Vocab::from_tokens(relkit::collect_tokens(corpus)),
                      relkit::RelationSchema(relkit::collect_relations(corpus)));
  model.init_params(cfg.seed);

  const relkit::TrainResult result = relkit::train(model, corpus, nullptr);
  std::cout << "trained " << result.steps << " steps, final epoch loss "
            << result.epoch_mean_loss.back() << "\n\n";

  std::cout << relkit::format_metrics_tsv(relkit::evaluate(model, corpus, cfg.threshold))
            << "\n";

  std::cout << "decoded triplets for the first sample:\n";
  for (const auto& pred : model.predict(corpus.front(), cfg.threshold)) {
    std::cout << "  <" << model.schema().name(pred.relation) << ", " << pred.head << ", "
              << pred.tail << ">  p=" << pred.probability << "\n";
  }
  return 0;
}
