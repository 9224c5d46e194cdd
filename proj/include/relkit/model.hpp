#pragma once

#include <string>
#include <utility>
#include <vector>

#include "relkit/config.hpp"
#include "relkit/corpus.hpp"
#include "relkit/decode.hpp"
#include "relkit/encoder.hpp"
#include "relkit/loss.hpp"
#include "relkit/relation_head.hpp"
#include "relkit/vocab.hpp"

namespace relkit {

// Token ids plus the pair matrices a sample needs during training, built at
// a fixed padded length.
struct PreparedSample {
  TokenSequence seq;
  SpanList entities;
  std::vector<Triplet> gold;
  PairMatrices matrices;
};

// Encoder + relation head + loss assembled over one parameter store. The
// graph path is the single numeric implementation; inference just reads
// values off a throwaway tape.
class Model {
 public:
  Model(TrainConfig cfg, Vocab vocab, RelationSchema schema)
      : cfg_(std::move(cfg)), vocab_(std::move(vocab)), schema_(std::move(schema)) {
    cfg_.validate();
    if (schema_.size() < 1) throw Error("model: schema has no relations");
  }

  void init_params(std::uint64_t seed) {
    if (params_.size() != 0) throw Error("model: parameters already initialized");
    Rng rng(seed);
    init_encoder_params(params_, cfg_.encoder(), vocab_.size(), rng);
    init_head_params(params_, schema_.size(), cfg_.hidden, rng);
  }

  const TrainConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  const RelationSchema& schema() const { return schema_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // pad_to = 0 keeps the sample's natural length. Errors out rather than
  // letting truncation cut an entity span.
  PreparedSample prepare(const Sample& sample, int pad_to = 0) const {
    PreparedSample prep;
    prep.seq = encode_tokens(sample.tokens, vocab_, cfg_.max_seq_len, pad_to);
    for (const auto& [id, span] : sample.entities) {
      if (span.end >= prep.seq.valid_len) {
        throw Error("prepare: truncation to " + std::to_string(cfg_.max_seq_len) +
                    " would cut entity " + id);
      }
    }
    prep.entities = sample.entities;
    prep.gold = sample.triplets;
    prep.matrices = build_pair_matrices(sample, schema_, prep.seq.length());
    return prep;
  }

  // L_r for one sample as a graph node.
  Var build_loss(Tape& tape, const PreparedSample& prep) const {
    GraphParams graph_params(tape, params_);
    const EncoderGraphOut enc = encode_graph(graph_params, cfg_.encoder(), prep.seq);
    const Var e_b = compose_head_representation(enc.e_w, enc.e_a);
    const std::vector<Var> scores = score_graph(graph_params, e_b, enc.e_p, schema_.size());
    std::vector<Var> losses;
    losses.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      losses.push_back(masked_bce_graph(scores[i], prep.matrices.mask, prep.matrices.labels[i]));
    }
    return total_loss_graph(losses);
  }

  double loss_value(const PreparedSample& prep) const {
    Tape tape;
    return build_loss(tape, prep).value().value();
  }

  // Per-sample loss and gradients; the map covers every parameter, with
  // zeros for any leaf the loss did not reach.
  double loss_and_grads(const PreparedSample& prep, GradientMap& out) const {
    Tape tape;
    const Var loss = build_loss(tape, prep);
    GradientMap tape_grads = tape.backward(loss);
    out = zero_grads();
    for (auto& [name, g] : tape_grads) out.at(name) += g;
    return loss.value().value();
  }

  GradientMap zero_grads() const {
    GradientMap out;
    for (const std::string& name : params_.names()) {
      out.emplace(name, Tensor(params_.at(name).shape()));
    }
    return out;
  }

  EmbeddingSet embed(const TokenSequence& seq) const {
    return encode(params_, cfg_.encoder(), seq);
  }

  ScoreStack score_sequence(const TokenSequence& seq) const {
    Tape tape;
    GraphParams graph_params(tape, params_);
    const EncoderGraphOut enc = encode_graph(graph_params, cfg_.encoder(), seq);
    const Var e_b = compose_head_representation(enc.e_w, enc.e_a);
    ScoreStack stack;
    for (Var s_i : score_graph(graph_params, e_b, enc.e_p, schema_.size())) {
      stack.s.push_back(s_i.value());
      stack.p.push_back(sigmoid(s_i).value());
    }
    return stack;
  }

  std::vector<TripletPrediction> predict(const Sample& sample, double threshold) const {
    if (sample.entities.empty()) return {};  // nothing to pair
    const PreparedSample prep = prepare(sample);
    const ScoreStack stack = score_sequence(prep.seq);
    return extract_triplets(stack.p, prep.entities, schema_, threshold);
  }

 private:
  TrainConfig cfg_;
  Vocab vocab_;
  RelationSchema schema_;
  ParamStore params_;
};

}  // namespace relkit
