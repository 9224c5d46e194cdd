#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relkit/error.hpp"
#include "relkit/rng.hpp"

namespace relkit {

// Inclusive token index range of one entity, measured in the [CLS]-offset
// sequence (begin >= 1 always; padding is never covered).
struct EntitySpan {
  int begin = 0;
  int end = 0;

  int length() const { return end - begin + 1; }
  friend bool operator==(const EntitySpan&, const EntitySpan&) = default;
};

struct Triplet {
  std::string relation;
  std::string head;
  std::string tail;

  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

// One annotated sentence. Entity spans are stored after the +1 [CLS] shift;
// the on-disk format keeps raw token indices (see load_corpus).
struct Sample {
  std::string text;
  std::vector<std::string> tokens;  // excluding [CLS]
  std::vector<std::pair<std::string, EntitySpan>> entities;
  std::vector<Triplet> triplets;

  int seq_len() const { return static_cast<int>(tokens.size()) + 1; }

  const EntitySpan* find_span(const std::string& id) const {
    for (const auto& [eid, span] : entities) {
      if (eid == id) return &span;
    }
    return nullptr;
  }

  const EntitySpan& span_of(const std::string& id) const {
    const EntitySpan* s = find_span(id);
    if (!s) throw Error("sample: unknown entity id " + id);
    return *s;
  }

  friend bool operator==(const Sample&, const Sample&) = default;
};

namespace detail {

inline void validate_sample(const Sample& s, const std::string& where) {
  if (s.tokens.empty()) throw ParseError(where + ": sample has no tokens");
  for (const auto& tok : s.tokens) {
    if (tok == "[CLS]" || tok == "[PAD]" || tok == "[UNK]") {
      throw ParseError(where + ": reserved token in text: " + tok);
    }
  }
  std::set<std::string> ids;
  for (const auto& [id, span] : s.entities) {
    if (id.empty()) throw ParseError(where + ": empty entity id");
    if (!ids.insert(id).second) throw ParseError(where + ": duplicate entity id " + id);
    if (span.begin < 1 || span.end < span.begin || span.end >= s.seq_len()) {
      throw ParseError(where + ": entity " + id + " span out of range");
    }
  }
  for (std::size_t i = 0; i < s.entities.size(); ++i) {
    for (std::size_t j = i + 1; j < s.entities.size(); ++j) {
      const auto& a = s.entities[i].second;
      const auto& b = s.entities[j].second;
      if (a.begin <= b.end && b.begin <= a.end) {
        throw ParseError(where + ": overlapping spans for entities " +
                         s.entities[i].first + " and " + s.entities[j].first);
      }
    }
  }
  std::set<Triplet> seen;
  for (const auto& t : s.triplets) {
    if (t.relation.empty()) throw ParseError(where + ": empty relation name");
    if (!ids.count(t.head)) {
      throw ParseError(where + ": triplet references missing entity id " + t.head);
    }
    if (!ids.count(t.tail)) {
      throw ParseError(where + ": triplet references missing entity id " + t.tail);
    }
    if (t.head == t.tail) {
      throw ParseError(where + ": triplet head equals tail (" + t.head + ")");
    }
    if (!seen.insert(t).second) {
      throw ParseError(where + ": duplicate triplet (" + t.relation + ", " + t.head +
                       ", " + t.tail + ")");
    }
  }
}

}  // namespace detail

// One JSON object per line with fields text / tokens / entities / triplets.
// Entity start/end are inclusive indices into "tokens"; the loader adds the
// +1 [CLS] offset.
inline std::vector<Sample> load_corpus_stream(std::istream& in, const std::string& name) {
  std::vector<Sample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    Sample s;
    try {
      s.text = rec.at("text").get<std::string>();
      s.tokens = rec.at("tokens").get<std::vector<std::string>>();
      for (const auto& ent : rec.at("entities")) {
        EntitySpan span{ent.at("start").get<int>() + 1, ent.at("end").get<int>() + 1};
        s.entities.emplace_back(ent.at("id").get<std::string>(), span);
      }
      for (const auto& tri : rec.at("triplets")) {
        s.triplets.push_back(Triplet{tri.at("relation").get<std::string>(),
                                     tri.at("head").get<std::string>(),
                                     tri.at("tail").get<std::string>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": bad record: " + e.what());
    }
    detail::validate_sample(s, where);
    samples.push_back(std::move(s));
  }
  return samples;
}

inline std::vector<Sample> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("corpus: cannot open " + path);
  return load_corpus_stream(in, path);
}

inline void write_corpus_stream(std::ostream& out, const std::vector<Sample>& samples) {
  for (const Sample& s : samples) {
    nlohmann::json rec;
    rec["text"] = s.text;
    rec["tokens"] = s.tokens;
    rec["entities"] = nlohmann::json::array();
    for (const auto& [id, span] : s.entities) {
      rec["entities"].push_back({{"id", id}, {"start", span.begin - 1}, {"end", span.end - 1}});
    }
    rec["triplets"] = nlohmann::json::array();
    for (const auto& t : s.triplets) {
      rec["triplets"].push_back(
          {{"relation", t.relation}, {"head", t.head}, {"tail", t.tail}});
    }
    out << rec.dump() << "\n";
  }
}

inline void write_corpus(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("corpus: cannot open " + path + " for writing");
  write_corpus_stream(out, samples);
}

// ---- complexity taxonomy ----------------------------------------------------

struct OverlapTags {
  bool epo = false;
  bool seo = false;

  bool normal() const { return !epo && !seo; }
};

// EPO: two triplets on the same unordered entity pair with different
// relations. Reversed pairs count as the same pair. SEO: two triplets
// sharing exactly one entity.
inline OverlapTags classify_overlap(const Sample& s) {
  OverlapTags tags;
  const auto& ts = s.triplets;
  for (std::size_t i = 0; i < ts.size() && !(tags.epo && tags.seo); ++i) {
    for (std::size_t j = i + 1; j < ts.size(); ++j) {
      const auto pair_i = std::minmax(ts[i].head, ts[i].tail);
      const auto pair_j = std::minmax(ts[j].head, ts[j].tail);
      if (pair_i == pair_j) {
        if (ts[i].relation != ts[j].relation) tags.epo = true;
      } else {
        int shared = 0;
        if (ts[i].head == ts[j].head || ts[i].head == ts[j].tail) ++shared;
        if (ts[i].tail == ts[j].head || ts[i].tail == ts[j].tail) ++shared;
        if (shared == 1) tags.seo = true;
      }
    }
  }
  return tags;
}

enum class Multiplicity { kSingle, kDouble, kMultiple };

// Zero-triplet samples fall outside the published taxonomy; they count as
// Single and the caller is expected to warn (see CorpusStats).
inline Multiplicity classify_multiplicity(const Sample& s) {
  if (s.triplets.size() >= 3) return Multiplicity::kMultiple;
  if (s.triplets.size() == 2) return Multiplicity::kDouble;
  return Multiplicity::kSingle;
}

struct CorpusStats {
  long normal = 0;
  long epo = 0;
  long seo = 0;
  long single = 0;
  long double_ = 0;
  long multiple = 0;
  long total = 0;
  long zero_triplet = 0;
};

inline CorpusStats corpus_stats(const std::vector<Sample>& samples) {
  CorpusStats st;
  for (const Sample& s : samples) {
    const OverlapTags tags = classify_overlap(s);
    if (tags.normal()) ++st.normal;
    if (tags.epo) ++st.epo;
    if (tags.seo) ++st.seo;
    switch (classify_multiplicity(s)) {
      case Multiplicity::kSingle: ++st.single; break;
      case Multiplicity::kDouble: ++st.double_; break;
      case Multiplicity::kMultiple: ++st.multiple; break;
    }
    if (s.triplets.empty()) ++st.zero_triplet;
    ++st.total;
  }
  return st;
}

inline std::string format_stats_tsv(const CorpusStats& st) {
  std::ostringstream os;
  os << "Situations\tCount\n";
  os << "Normal\t" << st.normal << "\n";
  os << "EPO\t" << st.epo << "\n";
  os << "SEO\t" << st.seo << "\n";
  os << "Single\t" << st.single << "\n";
  os << "Double\t" << st.double_ << "\n";
  os << "Multiple\t" << st.multiple << "\n";
  os << "All\t" << st.total << "\n";
  return os.str();
}

// ---- helpers shared with training --------------------------------------------

inline std::vector<std::string> collect_relations(const std::vector<Sample>& samples) {
  std::set<std::string> names;
  for (const Sample& s : samples)
    for (const Triplet& t : s.triplets) names.insert(t.relation);
  return {names.begin(), names.end()};
}

inline std::vector<std::string> collect_tokens(const std::vector<Sample>& samples) {
  std::vector<std::string> out;
  for (const Sample& s : samples) out.insert(out.end(), s.tokens.begin(), s.tokens.end());
  return out;
}

// Maps a character range of `text` (begin inclusive, end exclusive) onto the
// covering whitespace-token range; for importing datasets annotated at the
// character level. Returned indices are pre-[CLS], as in the corpus file.
inline std::pair<int, int> char_span_to_token_span(const std::string& text,
                                                   int char_begin, int char_end) {
  if (char_begin < 0 || char_end <= char_begin ||
      char_end > static_cast<int>(text.size())) {
    throw Error("char_span_to_token_span: bad character range");
  }
  int tok = -1, first = -1, last = -1;
  bool in_token = false;
  for (int i = 0; i < static_cast<int>(text.size()); ++i) {
    const bool ws = std::isspace(static_cast<unsigned char>(text[i])) != 0;
    if (!ws && !in_token) {
      in_token = true;
      ++tok;
    } else if (ws) {
      in_token = false;
    }
    if (!ws && i >= char_begin && i < char_end) {
      if (first < 0) first = tok;
      last = tok;
    }
  }
  if (first < 0) throw Error("char_span_to_token_span: range covers no token");
  return {first, last};
}

// ---- synthetic corpus ---------------------------------------------------------

// Template-generated sentences whose relations are decidable from surface
// tokens: relation i is asserted by its trigger word standing between the
// head and tail spans. Gold annotations are exact by construction.
struct SynthConfig {
  std::uint64_t seed = 1;
  int vocab_size = 100;
  int relations = 4;
  int samples = 200;
  // Weights over sample categories; zero-weight categories are skipped.
  std::map<std::string, double> mix{{"normal", 1.0}};
  int max_span = 2;    // entity span length in tokens, 1..max_span
  int max_filler = 2;  // filler tokens at each sentence edge, 0..max_filler
};

inline std::vector<Sample> synth_generate(const SynthConfig& cfg) {
  static const std::set<std::string> kCategories{"normal", "epo", "seo", "multi"};
  if (cfg.relations < 1) throw Error("synth: need at least one relation");
  if (cfg.samples < 0) throw Error("synth: negative sample count");
  if (cfg.max_span < 1) throw Error("synth: max_span must be positive");
  double weight_sum = 0.0;
  for (const auto& [cat, w] : cfg.mix) {
    if (!kCategories.count(cat)) throw Error("synth: unknown mix category " + cat);
    if (w < 0.0) throw Error("synth: negative weight for " + cat);
    weight_sum += w;
  }
  if (weight_sum <= 0.0) throw Error("synth: mix weights sum to zero");
  if (cfg.mix.count("epo") && cfg.mix.at("epo") > 0.0 && cfg.relations < 2) {
    throw Error("synth: epo mix requires at least 2 relations");
  }

  const int trigger_count = cfg.relations;
  const int rest = cfg.vocab_size - trigger_count;
  const int entity_count = rest / 2;
  const int filler_count = rest - entity_count;
  if (entity_count < 8 || filler_count < 2) {
    throw Error("synth: vocab_size too small for " + std::to_string(cfg.relations) +
                " relations");
  }

  std::vector<std::string> entity_pool, filler_pool, triggers, relation_names;
  for (int i = 0; i < entity_count; ++i) entity_pool.push_back("ent" + std::to_string(i));
  for (int i = 0; i < filler_count; ++i) filler_pool.push_back("w" + std::to_string(i));
  for (int i = 0; i < cfg.relations; ++i) {
    triggers.push_back("cue" + std::to_string(i));
    relation_names.push_back("r" + std::to_string(i));
  }

  // Deterministic category schedule: floor allocation, remainder in fixed
  // order, then a seeded shuffle.
  std::vector<std::string> schedule;
  std::vector<std::pair<std::string, double>> weighted(cfg.mix.begin(), cfg.mix.end());
  int assigned = 0;
  for (const auto& [cat, w] : weighted) {
    const int n = static_cast<int>(w / weight_sum * cfg.samples);
    schedule.insert(schedule.end(), static_cast<std::size_t>(n), cat);
    assigned += n;
  }
  for (std::size_t i = 0; assigned < cfg.samples; ++i) {
    const auto& [cat, w] = weighted[i % weighted.size()];
    if (w <= 0.0) continue;
    schedule.push_back(cat);
    ++assigned;
  }

  Rng rng(cfg.seed);
  rng.shuffle(schedule);

  std::vector<Sample> out;
  out.reserve(schedule.size());
  for (const std::string& cat : schedule) {
    int triplet_count = 1;
    if (cat == "epo" || cat == "seo") triplet_count = 2;
    if (cat == "multi") triplet_count = 3;
    const int span_count = cat == "epo" ? 2 : triplet_count + 1;

    // Distinct entity tokens across all spans of the sample.
    std::vector<std::string> pool = entity_pool;
    rng.shuffle(pool);
    std::size_t next_tok = 0;
    std::vector<std::vector<std::string>> span_tokens;
    for (int e = 0; e < span_count; ++e) {
      const int len = 1 + rng.below(cfg.max_span);
      std::vector<std::string> toks;
      for (int k = 0; k < len; ++k) toks.push_back(pool[next_tok++]);
      span_tokens.push_back(std::move(toks));
    }

    // Choose relations. EPO needs two distinct ones on the same pair.
    std::vector<int> rel;
    if (cat == "epo") {
      const int r1 = rng.below(cfg.relations);
      int r2 = rng.below(cfg.relations - 1);
      if (r2 >= r1) ++r2;
      rel = {r1, r2};
    } else {
      for (int k = 0; k < triplet_count; ++k) rel.push_back(rng.below(cfg.relations));
    }

    Sample s;
    auto emit_filler = [&](int max_n) {
      for (int k = rng.below(max_n + 1); k > 0; --k) {
        s.tokens.push_back(filler_pool[static_cast<std::size_t>(
            rng.below(static_cast<int>(filler_pool.size())))]);
      }
    };
    auto emit_entity = [&](int idx) {
      const int start = static_cast<int>(s.tokens.size());
      for (const auto& tok : span_tokens[static_cast<std::size_t>(idx)])
        s.tokens.push_back(tok);
      const int end = static_cast<int>(s.tokens.size()) - 1;
      s.entities.emplace_back("e" + std::to_string(idx + 1),
                              EntitySpan{start + 1, end + 1});
    };

    emit_filler(cfg.max_filler);
    emit_entity(0);  // shared head
    if (cat == "epo") {
      s.tokens.push_back(triggers[static_cast<std::size_t>(rel[0])]);
      s.tokens.push_back(triggers[static_cast<std::size_t>(rel[1])]);
      emit_entity(1);
      s.triplets.push_back({relation_names[static_cast<std::size_t>(rel[0])], "e1", "e2"});
      s.triplets.push_back({relation_names[static_cast<std::size_t>(rel[1])], "e1", "e2"});
    } else {
      for (int k = 0; k < triplet_count; ++k) {
        s.tokens.push_back(triggers[static_cast<std::size_t>(rel[static_cast<std::size_t>(k)])]);
        emit_entity(k + 1);
        s.triplets.push_back({relation_names[static_cast<std::size_t>(rel[static_cast<std::size_t>(k)])],
                              "e1", "e" + std::to_string(k + 2)});
      }
    }
    emit_filler(cfg.max_filler);

    std::ostringstream text;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (i) text << ' ';
      text << s.tokens[i];
    }
    s.text = text.str();
    detail::validate_sample(s, "synth");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace relkit
