#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "relkit/model.hpp"

namespace relkit {

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<GradCheckEntry> entries;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
  }

  bool passed() const { return worst() <= tolerance; }
};

// |analytic - fd| relative to the larger magnitude, floored at 1e-5 so
// finite-difference round-off on near-zero gradients does not read as
// failure while an outright wrong small gradient still does.
inline double gradcheck_rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-5});
}

// Central finite differences against the tape's analytic gradients for
// every parameter in the store. The builder must be a pure function of the
// store contents. Failures are reported in the result, never thrown.
inline GradCheckReport gradcheck(ParamStore& params,
                                 const std::function<Var(Tape&)>& build_loss,
                                 double tolerance, double fd_step = 1e-5) {
  GradCheckReport report;
  report.tolerance = tolerance;

  GradientMap analytic;
  {
    Tape tape;
    analytic = tape.backward(build_loss(tape));
  }
  auto eval = [&]() {
    Tape tape;
    return build_loss(tape).value().value();
  };

  for (const std::string& name : params.names()) {
    Tensor& theta = params.at(name);
    const Tensor* ga = analytic.count(name) ? &analytic.at(name) : nullptr;
    GradCheckEntry entry{name, 0.0};
    for (std::int64_t i = 0; i < theta.size(); ++i) {
      const double saved = theta.data()[i];
      theta.data()[i] = saved + fd_step;
      const double up = eval();
      theta.data()[i] = saved - fd_step;
      const double down = eval();
      theta.data()[i] = saved;
      const double fd = (up - down) / (2.0 * fd_step);
      const double an = ga ? ga->data()[i] : 0.0;
      entry.max_rel_err = std::max(entry.max_rel_err, gradcheck_rel_err(an, fd));
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

// ---- standard fragments (also driven by the CLI) ----------------------------

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

namespace fragments {

inline NamedGradCheck sigmoid_neuron(std::uint64_t seed) {
  Rng rng(seed);
  auto ps = std::make_shared<ParamStore>();
  ps->add("w", detail::gaussian(rng, {4, 1}, 1.0));
  ps->add("b", Tensor::scalar(rng.normal()));
  const Tensor x = detail::gaussian(rng, {1, 4}, 1.0);
  auto build = [ps, x](Tape& tape) {
    GraphParams p(tape, *ps);
    return sigmoid(add(sum(matmul(tape.leaf(x), p["w"])), p["b"]));
  };
  return {"sigmoid_neuron", gradcheck(*ps, build, 1e-6)};
}

// The whole relation head on random embeddings: scores, sigmoid, mask,
// labels, loss. The embeddings are parameters too so input gradients are
// covered.
inline NamedGradCheck relation_head(std::uint64_t seed) {
  constexpr int l = 6, h = 8, relations = 2;
  Rng rng(seed);
  auto ps = std::make_shared<ParamStore>();
  ps->add("e_w", detail::gaussian(rng, {l, h}, 1.0));
  ps->add("e_a", detail::gaussian(rng, {h}, 1.0));
  ps->add("e_p", detail::gaussian(rng, {l, h}, 1.0));
  init_head_params(*ps, relations, h, rng);

  // Two entities, spans {1,2} and {4}; mask both directions, one gold pair
  // per relation.
  const SpanList spans{{"a", {1, 2}}, {"b", {4, 4}}};
  const Tensor mask = build_mask(spans, all_ordered_pairs(spans), l);
  std::vector<Tensor> labels;
  labels.push_back(build_labels(spans, {Triplet{"r0", "a", "b"}}, l));
  labels.push_back(build_labels(spans, {Triplet{"r1", "b", "a"}}, l));

  auto build = [ps, mask, labels](Tape& tape) {
    GraphParams p(tape, *ps);
    Var e_b = compose_head_representation(p["e_w"], p["e_a"]);
    std::vector<Var> scores = score_graph(p, e_b, p["e_p"], relations);
    std::vector<Var> losses;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      losses.push_back(masked_bce_graph(scores[i], mask, labels[i]));
    }
    return total_loss_graph(losses);
  };
  return {"relation_head", gradcheck(*ps, build, 1e-4)};
}

// One transformer block; softmax and layernorm conditioning makes this the
// loosest tolerance of the suite.
inline NamedGradCheck encoder_block(std::uint64_t seed) {
  constexpr int l = 5, h = 8, heads = 2;
  Rng rng(seed);
  auto ps = std::make_shared<ParamStore>();
  EncoderConfig cfg;
  cfg.layers = 2;
  cfg.hidden = h;
  cfg.heads = heads;
  cfg.max_len = l;
  init_encoder_params(*ps, cfg, /*vocab_size=*/7, rng);
  const Tensor x = detail::gaussian(rng, {l, h}, 1.0);
  const Tensor bias = attention_bias(l, l);
  auto build = [ps, x, bias](Tape& tape) {
    GraphParams p(tape, *ps);
    return mean(transformer_layer(p, "enc.l0.", tape.leaf(x), bias, heads));
  };
  return {"encoder_block", gradcheck(*ps, build, 1e-3)};
}

// Full stack: encoder -> E_b -> scores -> masked BCE -> L_r on a tiny model.
inline NamedGradCheck full_stack(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.ffn_mult = 2;
  cfg.max_seq_len = 8;
  const Vocab vocab = Vocab::from_tokens({"alpha", "beta", "gamma", "delta", "eps"});
  const RelationSchema schema({"r0", "r1"});
  auto model = std::make_shared<Model>(cfg, vocab, schema);
  model->init_params(seed);

  Sample sample;
  sample.tokens = {"alpha", "beta", "gamma", "delta", "eps"};
  sample.text = "alpha beta gamma delta eps";
  sample.entities = {{"x", {1, 2}}, {"y", {4, 4}}};
  sample.triplets = {{"r0", "x", "y"}, {"r1", "y", "x"}};
  const PreparedSample prep = model->prepare(sample);  // l = 6

  auto build = [model, prep](Tape& tape) { return model->build_loss(tape, prep); };
  return {"full_stack", gradcheck(model->params(), build, 1e-4)};
}

}  // namespace fragments

inline std::vector<NamedGradCheck> run_standard_gradchecks(std::uint64_t seed) {
  return {fragments::sigmoid_neuron(seed), fragments::relation_head(seed + 1),
          fragments::encoder_block(seed + 2), fragments::full_stack(seed + 3)};
}

}  // namespace relkit
