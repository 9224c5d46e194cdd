#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "relkit/autodiff.hpp"
#include "relkit/rng.hpp"
#include "relkit/vocab.hpp"

namespace relkit {

struct EncoderConfig {
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int max_len = 64;
  int ffn_mult = 4;
  std::string cls_source = "final";  // final | penultimate

  void validate() const {
    if (layers < 2) throw Error("encoder: need at least 2 layers (penultimate output)");
    if (hidden < 1 || heads < 1 || hidden % heads != 0) {
      throw Error("encoder: hidden must be a positive multiple of heads");
    }
    if (max_len < 2) throw Error("encoder: max_len must be at least 2");
    if (ffn_mult < 1) throw Error("encoder: ffn_mult must be positive");
    if (cls_source != "final" && cls_source != "penultimate") {
      throw Error("encoder: cls_source must be 'final' or 'penultimate'");
    }
  }
};

inline void init_encoder_params(ParamStore& ps, const EncoderConfig& cfg, int vocab_size,
                                Rng& rng) {
  cfg.validate();
  const int h = cfg.hidden;
  const int f = cfg.hidden * cfg.ffn_mult;
  const double w_std = 1.0 / std::sqrt(static_cast<double>(h));
  ps.add("enc.tok_emb", detail::gaussian(rng, {vocab_size, h}, 0.02));
  ps.add("enc.pos_emb", detail::gaussian(rng, {cfg.max_len, h}, 0.02));
  for (int i = 0; i < cfg.layers; ++i) {
    const std::string p = "enc.l" + std::to_string(i) + ".";
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
      ps.add(p + w, detail::gaussian(rng, {h, h}, w_std));
    }
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) {
      ps.add(p + b, Tensor({h}));
    }
    ps.add(p + "ln1.gain", Tensor::full({h}, 1.0));
    ps.add(p + "ln1.bias", Tensor({h}));
    ps.add(p + "ffn.w1", detail::gaussian(rng, {h, f}, w_std));
    ps.add(p + "ffn.b1", Tensor({f}));
    ps.add(p + "ffn.w2", detail::gaussian(rng, {f, h}, 1.0 / std::sqrt(static_cast<double>(f))));
    ps.add(p + "ffn.b2", Tensor({h}));
    ps.add(p + "ln2.gain", Tensor::full({h}, 1.0));
    ps.add(p + "ln2.bias", Tensor({h}));
  }
}

// Additive attention bias: 0 over valid key positions, a large negative
// constant over padding so pad keys get exactly zero weight after softmax
// (exp underflows to 0). This is what makes embeddings pad-invariant.
inline Tensor attention_bias(int l, int valid_len) {
  Tensor bias({l, l});
  for (int i = 0; i < l; ++i)
    for (int j = valid_len; j < l; ++j) bias.at(i, j) = -1e30;
  return bias;
}

// One post-norm block: x = LN1(x + MHA(x)); x = LN2(x + FFN(x)).
inline Var transformer_layer(GraphParams& params, const std::string& prefix, Var x,
                             const Tensor& attn_bias, int heads) {
  const int h = x.value().cols();
  const int dh = h / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Var q = add_row_broadcast(matmul(x, params[prefix + "attn.wq"]), params[prefix + "attn.bq"]);
  Var k = add_row_broadcast(matmul(x, params[prefix + "attn.wk"]), params[prefix + "attn.bk"]);
  Var v = add_row_broadcast(matmul(x, params[prefix + "attn.wv"]), params[prefix + "attn.bv"]);

  std::vector<Var> contexts;
  contexts.reserve(static_cast<std::size_t>(heads));
  for (int head = 0; head < heads; ++head) {
    Var qh = col_slice(q, head * dh, (head + 1) * dh);
    Var kh = col_slice(k, head * dh, (head + 1) * dh);
    Var vh = col_slice(v, head * dh, (head + 1) * dh);
    Var logits = add_const(scale(matmul(qh, transpose(kh)), inv_sqrt_dh), attn_bias);
    Var weights = softmax_rows(logits);
    contexts.push_back(matmul(weights, vh));
  }
  Var ctx = concat_cols(contexts);
  Var attn_out =
      add_row_broadcast(matmul(ctx, params[prefix + "attn.wo"]), params[prefix + "attn.bo"]);
  x = layer_norm_rows(add(x, attn_out), params[prefix + "ln1.gain"],
                      params[prefix + "ln1.bias"]);

  Var inner = add_row_broadcast(matmul(x, params[prefix + "ffn.w1"]), params[prefix + "ffn.b1"]);
  Var ffn_out = add_row_broadcast(matmul(gelu(inner), params[prefix + "ffn.w2"]),
                                  params[prefix + "ffn.b2"]);
  return layer_norm_rows(add(x, ffn_out), params[prefix + "ln2.gain"],
                         params[prefix + "ln2.bias"]);
}

struct EncoderGraphOut {
  Var e_w;  // penultimate layer output, l x h
  Var e_p;  // final layer output, l x h
  Var e_a;  // CLS row, length h
};

inline EncoderGraphOut encode_graph(GraphParams& params, const EncoderConfig& cfg,
                                    const TokenSequence& seq) {
  cfg.validate();
  const int l = seq.length();
  if (l > cfg.max_len) {
    throw Error("encoder: sequence length " + std::to_string(l) +
                " exceeds max_len " + std::to_string(cfg.max_len));
  }
  if (l < 1 || seq.ids[0] != Vocab::kCls) throw Error("encoder: sequence must start with [CLS]");

  Var x = add(embedding_lookup(params["enc.tok_emb"], seq.ids),
              rows(params["enc.pos_emb"], 0, l));
  const Tensor bias = attention_bias(l, seq.valid_len);

  Var penultimate;
  for (int i = 0; i < cfg.layers; ++i) {
    x = transformer_layer(params, "enc.l" + std::to_string(i) + ".", x, bias, cfg.heads);
    if (i == cfg.layers - 2) penultimate = x;
  }
  EncoderGraphOut out;
  out.e_w = penultimate;
  out.e_p = x;
  out.e_a = row(cfg.cls_source == "final" ? out.e_p : out.e_w, 0);
  return out;
}

struct EmbeddingSet {
  Tensor e_w;
  Tensor e_p;
  Tensor e_a;
};

inline EmbeddingSet encode(const ParamStore& ps, const EncoderConfig& cfg,
                           const TokenSequence& seq) {
  Tape tape;
  GraphParams params(tape, ps);
  const EncoderGraphOut g = encode_graph(params, cfg, seq);
  return {g.e_w.value(), g.e_p.value(), g.e_a.value()};
}

}  // namespace relkit
