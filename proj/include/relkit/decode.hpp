#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "relkit/loss.hpp"
#include "relkit/relation_head.hpp"

namespace relkit {

struct TripletPrediction {
  int relation = 0;
  std::string head;
  std::string tail;
  double probability = 0.0;
};

// Mean of P_i over the block rows(span_x) x cols(span_y).
inline double pair_probability(const Tensor& p, const EntitySpan& span_x,
                               const EntitySpan& span_y) {
  kernel::require_matrix("pair_probability", p);
  const int l = p.rows();
  detail::check_span(span_x, l, "head");
  detail::check_span(span_y, l, "tail");
  double sum = 0.0;
  for (int r = span_x.begin; r <= span_x.end; ++r)
    for (int c = span_y.begin; c <= span_y.end; ++c) sum += p.at(r, c);
  return sum / (static_cast<double>(span_x.length()) * span_y.length());
}

// Every relation against every ordered pair of distinct entities; keeps
// strictly-above-threshold blocks, sorted by descending probability then
// (relation, head, tail) for stable output.
inline std::vector<TripletPrediction> extract_triplets(const std::vector<Tensor>& p_stack,
                                                       const SpanList& entities,
                                                       const RelationSchema& schema,
                                                       double threshold) {
  if (entities.empty()) throw Error("extract_triplets: no entities");
  if (static_cast<int>(p_stack.size()) != schema.size()) {
    throw Error("extract_triplets: probability stack does not match schema");
  }
  std::vector<TripletPrediction> out;
  for (int i = 0; i < schema.size(); ++i) {
    for (const auto& [x, sx] : entities) {
      for (const auto& [y, sy] : entities) {
        if (x == y) continue;
        const double prob = pair_probability(p_stack[static_cast<std::size_t>(i)], sx, sy);
        if (prob > threshold) out.push_back({i, x, y, prob});
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const TripletPrediction& a, const TripletPrediction& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return std::tie(a.relation, a.head, a.tail) < std::tie(b.relation, b.head, b.tail);
  });
  return out;
}

}  // namespace relkit
