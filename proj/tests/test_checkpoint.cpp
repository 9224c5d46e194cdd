#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "relkit/checkpoint.hpp"
#include "relkit/train.hpp"

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

relkit::Model trained_tiny_model() {
  relkit::SynthConfig synth;
  synth.seed = 41;
  synth.samples = 12;
  synth.vocab_size = 40;
  synth.relations = 2;
  const auto corpus = relkit::synth_generate(synth);

  relkit::TrainConfig cfg;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.ffn_mult = 2;
  cfg.max_seq_len = 32;
  cfg.max_epochs = 2;
  relkit::Model model(cfg, relkit::Vocab::from_tokens(relkit::collect_tokens(corpus)),
                      relkit::RelationSchema(relkit::collect_relations(corpus)));
  model.init_params(cfg.seed);
  relkit::train(model, corpus, nullptr);
  return model;
}

}  // namespace

TEST_CASE("checkpoint round-trip reproduces forward outputs bitwise", "[checkpoint]") {
  const relkit::Model model = trained_tiny_model();
  TempFile file("roundtrip_test.ckpt");
  relkit::save_checkpoint(file.path, model, 6);

  const relkit::Checkpoint ck = relkit::load_checkpoint(file.path);
  CHECK(ck.step == 6);
  CHECK(ck.schema_names == model.schema().names());
  const relkit::Model loaded = relkit::model_from_checkpoint(ck);

  for (const std::string& name : model.params().names()) {
    REQUIRE(loaded.params().at(name) == model.params().at(name));
  }

  const relkit::TokenSequence seq =
      relkit::tokenize("ent1 cue0 ent2", model.vocab(), 32);
  const relkit::EmbeddingSet a = model.embed(seq);
  const relkit::EmbeddingSet b = loaded.embed(seq);
  CHECK(a.e_w == b.e_w);
  CHECK(a.e_p == b.e_p);
  CHECK(a.e_a == b.e_a);

  const relkit::ScoreStack sa = model.score_sequence(seq);
  const relkit::ScoreStack sb = loaded.score_sequence(seq);
  for (std::size_t i = 0; i < sa.s.size(); ++i) {
    CHECK(sa.s[i] == sb.s[i]);
    CHECK(sa.p[i] == sb.p[i]);
  }
}

TEST_CASE("checkpoint preserves vocab ids and schema order", "[checkpoint]") {
  const relkit::Model model = trained_tiny_model();
  TempFile file("vocab_order_test.ckpt");
  relkit::save_checkpoint(file.path, model, 1);
  const relkit::Model loaded = relkit::model_from_checkpoint(relkit::load_checkpoint(file.path));
  CHECK(loaded.vocab().tokens() == model.vocab().tokens());
  CHECK(loaded.vocab().hash() == model.vocab().hash());
  CHECK(loaded.schema().names() == model.schema().names());
}

TEST_CASE("save -> load -> evaluate gives the identical report", "[checkpoint]") {
  relkit::SynthConfig synth;
  synth.seed = 41;
  synth.samples = 12;
  synth.vocab_size = 40;
  synth.relations = 2;
  const auto corpus = relkit::synth_generate(synth);
  const relkit::Model model = trained_tiny_model();

  TempFile file("eval_roundtrip.ckpt");
  relkit::save_checkpoint(file.path, model, 2);
  const relkit::Model loaded = relkit::model_from_checkpoint(relkit::load_checkpoint(file.path));

  const std::string a = relkit::format_metrics_tsv(relkit::evaluate(model, corpus, 0.5));
  const std::string b = relkit::format_metrics_tsv(relkit::evaluate(loaded, corpus, 0.5));
  CHECK(a == b);
}

TEST_CASE("a tampered vocab fails the manifest hash check", "[checkpoint]") {
  const relkit::Model model = trained_tiny_model();
  TempFile file("hash_check.ckpt");
  relkit::save_checkpoint(file.path, model, 1);
  relkit::Checkpoint ck = relkit::load_checkpoint(file.path);
  CHECK(ck.vocab_hash == model.vocab().hash());
  REQUIRE_FALSE(ck.vocab_tokens.empty());
  ck.vocab_tokens[0] += "_tampered";
  CHECK_THROWS_MATCHES(relkit::model_from_checkpoint(ck), relkit::ParseError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("vocab hash")));
}

TEST_CASE("corrupted checkpoints are rejected", "[checkpoint]") {
  CHECK_THROWS_AS(relkit::load_checkpoint("does_not_exist.ckpt"), relkit::Error);

  TempFile file("corrupt_test.ckpt");
  {
    std::ofstream out(file.path, std::ios::binary);
    out << "relkit-checkpoint v1\nmanifest 2\n{}\ntensors 1\nw 1 4\nblob 4\nxx";
  }
  CHECK_THROWS_AS(relkit::load_checkpoint(file.path), relkit::ParseError);

  {
    std::ofstream out(file.path, std::ios::binary);
    out << "something else entirely\n";
  }
  CHECK_THROWS_AS(relkit::load_checkpoint(file.path), relkit::ParseError);
}
