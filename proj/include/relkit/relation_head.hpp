#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "relkit/autodiff.hpp"
#include "relkit/rng.hpp"

namespace relkit {

// Ordered relation names; index i is the relation id used everywhere.
class RelationSchema {
 public:
  RelationSchema() = default;

  explicit RelationSchema(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw Error("schema: empty relation name");
      if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
        throw Error("schema: duplicate relation name " + names_[i]);
      }
    }
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }

  int id(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("schema: unknown relation " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

inline std::string head_param_name(int relation, const char* side) {
  return "head.r" + std::to_string(relation) + "." + side;
}

// Per-relation transformation matrices W_h / W_t, scaled Gaussian 1/sqrt(h).
inline void init_head_params(ParamStore& ps, int relations, int hidden, Rng& rng) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int i = 0; i < relations; ++i) {
    ps.add(head_param_name(i, "wh"), detail::gaussian(rng, {hidden, hidden}, stddev));
    ps.add(head_param_name(i, "wt"), detail::gaussian(rng, {hidden, hidden}, stddev));
  }
}

// E_b = E_w + E_a, the CLS context vector broadcast onto every token row.
inline Var compose_head_representation(const Var& e_w, const Var& e_a) {
  return add_row_broadcast(e_w, e_a);
}

// S_i = (E_b W_hi) (E_p W_ti)^T, one l x l score matrix per relation. Rows
// index head tokens, columns index tail tokens.
inline std::vector<Var> score_graph(GraphParams& params, const Var& e_b, const Var& e_p,
                                    int relations) {
  std::vector<Var> scores;
  scores.reserve(static_cast<std::size_t>(relations));
  for (int i = 0; i < relations; ++i) {
    Var head_side = matmul(e_b, params[head_param_name(i, "wh")]);
    Var tail_side = matmul(e_p, params[head_param_name(i, "wt")]);
    scores.push_back(matmul(head_side, transpose(tail_side)));
  }
  return scores;
}

// Unnormalized scores S and probabilities P = sigmoid(S) per relation,
// strictly inside (0,1).
struct ScoreStack {
  std::vector<Tensor> s;
  std::vector<Tensor> p;

  int relations() const { return static_cast<int>(s.size()); }
};

inline ScoreStack score(const ParamStore& ps, const Tensor& e_b, const Tensor& e_p,
                        int relations) {
  Tape tape;
  GraphParams params(tape, ps);
  Var vb = tape.leaf(e_b);
  Var vp = tape.leaf(e_p);
  ScoreStack stack;
  for (Var s_i : score_graph(params, vb, vp, relations)) {
    stack.s.push_back(s_i.value());
    stack.p.push_back(sigmoid(s_i).value());
  }
  return stack;
}

}  // namespace relkit
