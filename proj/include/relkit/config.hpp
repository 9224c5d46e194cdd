#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "relkit/corpus.hpp"
#include "relkit/encoder.hpp"
#include "relkit/error.hpp"

namespace relkit {

// Everything a run needs, flat so that key=value overrides stay simple.
// Defaults are desk-scale: a micro encoder trained from scratch in minutes.
struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 1e-3;
  int max_epochs = 50;
  int max_seq_len = 64;
  std::uint64_t seed = 42;
  double threshold = 0.5;
  int threads = 1;

  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int ffn_mult = 4;
  std::string cls_source = "final";

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  int synth_samples = 200;
  int synth_vocab = 100;
  int synth_relations = 4;
  int synth_max_span = 2;
  int synth_max_filler = 2;
  std::map<std::string, double> synth_mix{{"normal", 1.0}};

  void validate() const {
    if (batch_size < 1) throw Error("config: batch_size must be positive");
    if (learning_rate <= 0.0) throw Error("config: learning_rate must be positive");
    if (max_epochs < 1) throw Error("config: max_epochs must be positive");
    if (max_seq_len < 2) throw Error("config: max_seq_len must be at least 2");
    if (threshold <= 0.0 || threshold >= 1.0) throw Error("config: threshold must be in (0,1)");
    if (threads < 1) throw Error("config: threads must be positive");
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0 ||
        adam_eps <= 0.0) {
      throw Error("config: bad Adam parameters");
    }
    encoder().validate();
  }

  EncoderConfig encoder() const {
    return EncoderConfig{layers, hidden, heads, max_seq_len, ffn_mult, cls_source};
  }

  SynthConfig synth() const {
    return SynthConfig{seed,
                       synth_vocab,
                       synth_relations,
                       synth_samples,
                       synth_mix,
                       synth_max_span,
                       synth_max_filler};
  }

  // Dataset presets: batch size, learning rate, epochs and maximum sequence
  // length as published for each corpus.
  void apply_profile(const std::string& name) {
    if (name == "semeval") {
      batch_size = 64;
      learning_rate = 3e-5;
      max_epochs = 50;
      max_seq_len = 512;
    } else if (name == "nyt") {
      batch_size = 20;
      learning_rate = 5e-5;
      max_epochs = 10;
      max_seq_len = 100;
    } else if (name == "webnlg") {
      batch_size = 20;
      learning_rate = 3e-5;
      max_epochs = 30;
      max_seq_len = 512;
    } else {
      throw Error("config: unknown profile " + name + " (expected semeval|nyt|webnlg)");
    }
  }

  void apply_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error("config: document must be a JSON object");
    for (const auto& [key, value] : doc.items()) set_key(key, value);
  }

  // key=value override, value parsed as JSON when possible so numbers and
  // objects (synth_mix) both work.
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error("config: override must look like key=value, got " + assignment);
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;  // bare strings
    set_key(key, value);
  }

  // threads is a runtime knob with no effect on results and is deliberately
  // not persisted: checkpoints from runs that differ only in --threads are
  // bitwise identical.
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["max_epochs"] = max_epochs;
    j["max_seq_len"] = max_seq_len;
    j["seed"] = seed;
    j["threshold"] = threshold;
    j["layers"] = layers;
    j["hidden"] = hidden;
    j["heads"] = heads;
    j["ffn_mult"] = ffn_mult;
    j["cls_source"] = cls_source;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["synth_samples"] = synth_samples;
    j["synth_vocab"] = synth_vocab;
    j["synth_relations"] = synth_relations;
    j["synth_max_span"] = synth_max_span;
    j["synth_max_filler"] = synth_max_filler;
    j["synth_mix"] = synth_mix;
    return j;
  }

  static TrainConfig from_json(const nlohmann::json& doc) {
    TrainConfig cfg;
    cfg.apply_json(doc);
    return cfg;
  }

  static TrainConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("config: cannot open " + path);
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("config: " + path + ": " + e.what());
    }
    return from_json(doc);
  }

 private:
  template <class T>
  static T as(const nlohmann::json& v, const std::string& key) {
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error("config: bad value for " + key);
    }
  }

  void set_key(const std::string& key, const nlohmann::json& v) {
    if (key == "batch_size") batch_size = as<int>(v, key);
    else if (key == "learning_rate") learning_rate = as<double>(v, key);
    else if (key == "max_epochs") max_epochs = as<int>(v, key);
    else if (key == "max_seq_len") max_seq_len = as<int>(v, key);
    else if (key == "seed") seed = as<std::uint64_t>(v, key);
    else if (key == "threshold") threshold = as<double>(v, key);
    else if (key == "threads") threads = as<int>(v, key);
    else if (key == "layers") layers = as<int>(v, key);
    else if (key == "hidden") hidden = as<int>(v, key);
    else if (key == "heads") heads = as<int>(v, key);
    else if (key == "ffn_mult") ffn_mult = as<int>(v, key);
    else if (key == "cls_source") cls_source = as<std::string>(v, key);
    else if (key == "adam_beta1") adam_beta1 = as<double>(v, key);
    else if (key == "adam_beta2") adam_beta2 = as<double>(v, key);
    else if (key == "adam_eps") adam_eps = as<double>(v, key);
    else if (key == "synth_samples") synth_samples = as<int>(v, key);
    else if (key == "synth_vocab") synth_vocab = as<int>(v, key);
    else if (key == "synth_relations") synth_relations = as<int>(v, key);
    else if (key == "synth_max_span") synth_max_span = as<int>(v, key);
    else if (key == "synth_max_filler") synth_max_filler = as<int>(v, key);
    else if (key == "synth_mix") synth_mix = as<std::map<std::string, double>>(v, key);
    else throw Error("config: unknown key " + key);
  }
};

}  // namespace relkit
