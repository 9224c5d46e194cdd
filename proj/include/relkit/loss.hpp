#pragma once

#include <string>
#include <utility>
#include <vector>

#include "relkit/autodiff.hpp"
#include "relkit/corpus.hpp"
#include "relkit/relation_head.hpp"

namespace relkit {

using EntityPair = std::pair<std::string, std::string>;
using SpanList = std::vector<std::pair<std::string, EntitySpan>>;

// All ordered pairs of distinct annotated entities, both directions and no
// self-pairs, in annotation order. Both directions are needed so the model
// can learn which side is the head.
inline std::vector<EntityPair> all_ordered_pairs(const SpanList& entities) {
  std::vector<EntityPair> pairs;
  for (const auto& [x, sx] : entities) {
    for (const auto& [y, sy] : entities) {
      if (x != y) pairs.emplace_back(x, y);
    }
  }
  return pairs;
}

namespace detail {

inline const EntitySpan& span_lookup(const SpanList& spans, const std::string& id) {
  for (const auto& [eid, span] : spans) {
    if (eid == id) return span;
  }
  throw Error("pair matrices: unknown entity id " + id);
}

inline void check_span(const EntitySpan& span, int l, const std::string& id) {
  if (span.begin < 1 || span.end < span.begin || span.end >= l) {
    throw Error("pair matrices: span of entity " + id + " outside [1, " +
                std::to_string(l) + ")");
  }
}

inline void fill_block(Tensor& m, const EntitySpan& rows, const EntitySpan& cols) {
  for (int r = rows.begin; r <= rows.end; ++r)
    for (int c = cols.begin; c <= cols.end; ++c) m.at(r, c) = 1.0;
}

}  // namespace detail

// Mask matrix M (l x l): 1 exactly where some ordered pair (x, y) puts a
// head-token row inside x's span and a tail-token column inside y's span.
inline Tensor build_mask(const SpanList& spans, const std::vector<EntityPair>& pairs,
                         int l) {
  Tensor m({l, l});
  for (const auto& [x, y] : pairs) {
    const EntitySpan& sx = detail::span_lookup(spans, x);
    const EntitySpan& sy = detail::span_lookup(spans, y);
    detail::check_span(sx, l, x);
    detail::check_span(sy, l, y);
    detail::fill_block(m, sx, sy);
  }
  return m;
}

// Label matrix Y_i for one relation: a block of ones per gold (head, tail).
// Directional: head spans index rows only.
inline Tensor build_labels(const SpanList& spans, const std::vector<Triplet>& gold,
                           int l) {
  Tensor y({l, l});
  for (const Triplet& t : gold) {
    const EntitySpan& sh = detail::span_lookup(spans, t.head);
    const EntitySpan& st = detail::span_lookup(spans, t.tail);
    detail::check_span(sh, l, t.head);
    detail::check_span(st, l, t.tail);
    detail::fill_block(y, sh, st);
  }
  return y;
}

// Per-sample mask plus one label matrix per relation in schema order.
struct PairMatrices {
  Tensor mask;
  std::vector<Tensor> labels;
};

inline PairMatrices build_pair_matrices(const Sample& sample, const RelationSchema& schema,
                                        int l) {
  PairMatrices pm;
  pm.mask = build_mask(sample.entities, all_ordered_pairs(sample.entities), l);
  pm.labels.reserve(static_cast<std::size_t>(schema.size()));
  for (int i = 0; i < schema.size(); ++i) {
    std::vector<Triplet> gold;
    for (const Triplet& t : sample.triplets) {
      if (t.relation == schema.name(i)) gold.push_back(t);
    }
    pm.labels.push_back(build_labels(sample.entities, gold, l));
  }
  return pm;
}

namespace detail {

// Returns the BCE normalizer: the count of positive labeled cells inside the
// mask, falling back to the masked-cell count when the relation has no
// positives so negative evidence still trains. 0 means nothing is masked.
inline std::pair<long, long> masked_counts(const Tensor& mask, const Tensor& labels) {
  require_same_shape("masked_bce", mask, labels);
  long masked = 0, positive = 0;
  for (std::int64_t i = 0; i < mask.size(); ++i) {
    const bool m = mask.data()[i] != 0.0;
    const bool y = labels.data()[i] != 0.0;
    if (y && !m) throw Error("masked_bce: label set outside mask");
    if (m) ++masked;
    if (y) ++positive;
  }
  return {masked, positive};
}

}  // namespace detail

// Masked average BCE of one relation, computed in logit space:
//   L_i = [ sum_{M=1,Y=1} softplus(-s) + sum_{M=1,Y=0} softplus(s) ] / D
// with D the positive-cell count (fallback: masked-cell count). Equals the
// negated probability-space formula wherever sigmoid does not underflow, and
// is exactly 0 at unmasked cells.
inline Var masked_bce_graph(const Var& logits, const Tensor& mask, const Tensor& labels) {
  detail::require_same_shape("masked_bce", logits.value(), mask);
  const auto [masked, positive] = detail::masked_counts(mask, labels);
  Tape& tape = logits.tape();
  if (masked == 0) return tape.leaf(Tensor::scalar(0.0));
  const double denom = static_cast<double>(positive > 0 ? positive : masked);

  Tensor negated_labels = mask;  // mask * (1 - labels)
  for (std::int64_t i = 0; i < mask.size(); ++i) {
    negated_labels.data()[i] = mask.data()[i] * (1.0 - labels.data()[i]);
  }
  Var positive_terms = mul_const(softplus(scale(logits, -1.0)), labels);
  Var negative_terms = mul_const(softplus(logits), negated_labels);
  return scale(add(sum(positive_terms), sum(negative_terms)), 1.0 / denom);
}

inline double masked_bce(const Tensor& logits, const Tensor& mask, const Tensor& labels) {
  Tape tape;
  return masked_bce_graph(tape.leaf(logits), mask, labels).value().value();
}

// L_r = sum over relations of L_i.
inline Var total_loss_graph(const std::vector<Var>& per_relation) {
  if (per_relation.empty()) throw Error("total_loss: no relation losses");
  Var total = per_relation[0];
  for (std::size_t i = 1; i < per_relation.size(); ++i) total = add(total, per_relation[i]);
  return total;
}

inline double total_loss(const std::vector<double>& per_relation) {
  double sum = 0.0;
  for (double v : per_relation) sum += v;
  return sum;
}

}  // namespace relkit
