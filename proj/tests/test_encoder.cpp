#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include "relkit/encoder.hpp"
#include "relkit/vocab.hpp"

using relkit::EncoderConfig;
using relkit::ParamStore;
using relkit::Rng;
using relkit::TokenSequence;
using relkit::Vocab;

namespace {

Vocab tiny_vocab() { return Vocab::from_tokens({"a", "b", "c", "d", "e", "f"}); }

EncoderConfig tiny_config(int max_len = 16) {
  EncoderConfig cfg;
  cfg.layers = 2;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.ffn_mult = 2;
  cfg.max_len = max_len;
  return cfg;
}

ParamStore init_store(const EncoderConfig& cfg, int vocab_size, std::uint64_t seed) {
  ParamStore ps;
  Rng rng(seed);
  relkit::init_encoder_params(ps, cfg, vocab_size, rng);
  return ps;
}

}  // namespace

TEST_CASE("tokenize maps known tokens and pins CLS to position zero", "[encoder]") {
  Vocab v = Vocab::from_tokens({"a", "b"});
  // sorted build: a -> 3, b -> 4
  TokenSequence seq = relkit::tokenize("a b", v, 16);
  CHECK(seq.ids == std::vector<int>{Vocab::kCls, 3, 4});
  CHECK(seq.valid_len == 3);
}

TEST_CASE("tokenize sends unknown tokens to UNK", "[encoder]") {
  Vocab v = Vocab::from_tokens({"a", "b"});
  TokenSequence seq = relkit::tokenize("a zz", v, 16);
  CHECK(seq.ids == std::vector<int>{Vocab::kCls, 3, Vocab::kUnk});
}

TEST_CASE("tokenize truncates to the maximum sequence length", "[encoder]") {
  Vocab v = Vocab::from_tokens({"tok"});
  std::string text = "tok";
  for (int i = 1; i < 600; ++i) text += " tok";
  TokenSequence seq = relkit::tokenize(text, v, 512);
  CHECK(seq.length() == 512);
  CHECK(seq.valid_len == 512);
}

TEST_CASE("tokenize rejects empty text and pads to a batch length", "[encoder]") {
  Vocab v = Vocab::from_tokens({"a"});
  CHECK_THROWS_AS(relkit::tokenize("   ", v, 16), relkit::Error);
  TokenSequence seq = relkit::tokenize("a", v, 16, /*pad_to=*/8);
  CHECK(seq.length() == 8);
  CHECK(seq.valid_len == 2);
  for (int i = 2; i < 8; ++i) CHECK(seq.ids[static_cast<std::size_t>(i)] == Vocab::kPad);
}

TEST_CASE("vocab save/load round-trips ids and the reserved block", "[encoder]") {
  Vocab v = Vocab::from_tokens({"delta", "alpha", "zeta"});
  const std::string path = "vocab_roundtrip.txt";
  v.save(path);
  Vocab loaded = Vocab::load(path);
  std::remove(path.c_str());
  CHECK(loaded.tokens() == v.tokens());
  CHECK(loaded.hash() == v.hash());
  CHECK(loaded.id("alpha") == v.id("alpha"));
  CHECK(loaded.id("[CLS]") == 0);
}

TEST_CASE("encode produces the contracted shapes", "[encoder]") {
  const Vocab v = tiny_vocab();
  const EncoderConfig cfg = tiny_config();
  const ParamStore ps = init_store(cfg, v.size(), 42);
  const TokenSequence seq = relkit::tokenize("a b c", v, cfg.max_len);
  const relkit::EmbeddingSet set = relkit::encode(ps, cfg, seq);
  CHECK(set.e_w.shape() == std::vector<int>{4, cfg.hidden});
  CHECK(set.e_p.shape() == std::vector<int>{4, cfg.hidden});
  CHECK(set.e_a.shape() == std::vector<int>{cfg.hidden});
  for (int j = 0; j < cfg.hidden; ++j) CHECK(set.e_a.at(j) == set.e_p.at(0, j));
}

TEST_CASE("fixed seed and input reproduce the pinned golden embeddings", "[encoder]") {
  const Vocab v = tiny_vocab();
  const EncoderConfig cfg = tiny_config();
  const ParamStore ps = init_store(cfg, v.size(), 42);
  const TokenSequence seq = relkit::tokenize("a b c d e", v, cfg.max_len);
  const relkit::EmbeddingSet set = relkit::encode(ps, cfg, seq);

  // Golden file from a pinned reference run: raw doubles e_w, e_p, e_a.
  std::ifstream golden("fixtures/encoder_golden_seed42.bin", std::ios::binary);
  REQUIRE(golden.good());
  auto check_tensor = [&golden](const relkit::Tensor& t) {
    std::vector<double> expected(static_cast<std::size_t>(t.size()));
    golden.read(reinterpret_cast<char*>(expected.data()),
                static_cast<std::streamsize>(t.size()) * 8);
    REQUIRE(golden.good());
    for (std::int64_t i = 0; i < t.size(); ++i) {
      REQUIRE(t.data()[i] == expected[static_cast<std::size_t>(i)]);
    }
  };
  check_tensor(set.e_w);
  check_tensor(set.e_p);
  check_tensor(set.e_a);

  // And a second in-process run from the same seed is bitwise identical.
  const ParamStore ps2 = init_store(cfg, v.size(), 42);
  const relkit::EmbeddingSet again = relkit::encode(ps2, cfg, seq);
  CHECK(again.e_w == set.e_w);
  CHECK(again.e_p == set.e_p);
  CHECK(again.e_a == set.e_a);
}

TEST_CASE("valid-position embeddings are independent of pad length", "[encoder]") {
  const Vocab v = tiny_vocab();
  const EncoderConfig cfg = tiny_config(32);
  const ParamStore ps = init_store(cfg, v.size(), 7);
  const TokenSequence short_seq = relkit::tokenize("a b c d", v, cfg.max_len, 16);
  const TokenSequence long_seq = relkit::tokenize("a b c d", v, cfg.max_len, 32);
  REQUIRE(short_seq.valid_len == long_seq.valid_len);

  const relkit::EmbeddingSet a = relkit::encode(ps, cfg, short_seq);
  const relkit::EmbeddingSet b = relkit::encode(ps, cfg, long_seq);
  for (int i = 0; i < short_seq.valid_len; ++i) {
    for (int j = 0; j < cfg.hidden; ++j) {
      CHECK_THAT(a.e_w.at(i, j), Catch::Matchers::WithinAbs(b.e_w.at(i, j), 1e-9));
      CHECK_THAT(a.e_p.at(i, j), Catch::Matchers::WithinAbs(b.e_p.at(i, j), 1e-9));
    }
  }
}

TEST_CASE("the final layer is not an identity: E_p differs from E_w", "[encoder]") {
  const Vocab v = tiny_vocab();
  const EncoderConfig cfg = tiny_config();
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const ParamStore ps = init_store(cfg, v.size(), seed);
    const TokenSequence seq = relkit::tokenize("a b c", v, cfg.max_len);
    const relkit::EmbeddingSet set = relkit::encode(ps, cfg, seq);
    double max_diff = 0.0;
    for (std::int64_t i = 0; i < set.e_w.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(set.e_w.data()[i] - set.e_p.data()[i]));
    }
    CHECK(max_diff > 0.0);
  }
}

TEST_CASE("deeper stacks keep the penultimate/final split", "[encoder]") {
  const Vocab v = tiny_vocab();
  EncoderConfig cfg = tiny_config();
  cfg.layers = 3;
  const ParamStore ps = init_store(cfg, v.size(), 19);
  const relkit::EmbeddingSet set =
      relkit::encode(ps, cfg, relkit::tokenize("a b c", v, cfg.max_len));
  CHECK(set.e_w.shape() == std::vector<int>{4, cfg.hidden});
  double max_diff = 0.0;
  for (std::int64_t i = 0; i < set.e_w.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(set.e_w.data()[i] - set.e_p.data()[i]));
  }
  CHECK(max_diff > 0.0);
}

TEST_CASE("cls_source penultimate takes E_a from E_w's CLS row", "[encoder]") {
  const Vocab v = tiny_vocab();
  EncoderConfig cfg = tiny_config();
  cfg.cls_source = "penultimate";
  const ParamStore ps = init_store(cfg, v.size(), 11);
  const relkit::EmbeddingSet set =
      relkit::encode(ps, cfg, relkit::tokenize("a b", v, cfg.max_len));
  for (int j = 0; j < cfg.hidden; ++j) CHECK(set.e_a.at(j) == set.e_w.at(0, j));
}

TEST_CASE("oversized sequences are rejected", "[encoder]") {
  const Vocab v = tiny_vocab();
  const EncoderConfig cfg = tiny_config(4);
  const ParamStore ps = init_store(cfg, v.size(), 1);
  TokenSequence seq = relkit::tokenize("a b c d e f", v, 16);  // length 7 > max_len 4
  CHECK_THROWS_AS(relkit::encode(ps, cfg, seq), relkit::Error);
}

TEST_CASE("config validation catches bad layer and head settings", "[encoder]") {
  EncoderConfig cfg = tiny_config();
  cfg.layers = 1;
  CHECK_THROWS_AS(cfg.validate(), relkit::Error);
  cfg = tiny_config();
  cfg.heads = 3;  // 16 % 3 != 0
  CHECK_THROWS_AS(cfg.validate(), relkit::Error);
  cfg = tiny_config();
  cfg.cls_source = "first";
  CHECK_THROWS_AS(cfg.validate(), relkit::Error);
}
