#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "relkit/model.hpp"

namespace relkit {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

// Versioned text manifest followed by named, shape-tagged raw double blobs.
// Loading reproduces forward outputs bitwise.
//
//   relkit-checkpoint v1
//   manifest <bytes>
//   <manifest JSON>
//   tensors <count>
//   <name> <rank> <dims...>      (one line per tensor)
//   blob <total doubles>
//   <raw little-endian doubles in listing order>

struct Checkpoint {
  std::int64_t step = 0;
  TrainConfig config;
  std::vector<std::string> schema_names;
  std::vector<std::string> vocab_tokens;  // non-reserved, id order
  std::uint64_t vocab_hash = 0;
  ParamStore params;
};

inline void save_checkpoint(const std::string& path, const Model& model,
                            std::int64_t step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("checkpoint: cannot open " + path + " for writing");

  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["step"] = step;
  manifest["config"] = model.config().to_json();
  manifest["schema"] = model.schema().names();
  std::vector<std::string> vocab_tokens(model.vocab().tokens().begin() + Vocab::kReserved,
                                        model.vocab().tokens().end());
  manifest["vocab"] = vocab_tokens;
  std::ostringstream hash_hex;
  hash_hex << std::hex << model.vocab().hash();
  manifest["vocab_hash"] = hash_hex.str();
  const std::string manifest_text = manifest.dump();

  out << "relkit-checkpoint v1\n";
  out << "manifest " << manifest_text.size() << "\n";
  out << manifest_text << "\n";

  const ParamStore& ps = model.params();
  out << "tensors " << ps.size() << "\n";
  std::int64_t total = 0;
  for (const std::string& name : ps.names()) {
    const Tensor& t = ps.at(name);
    out << name << " " << t.rank();
    for (int d : t.shape()) out << " " << d;
    out << "\n";
    total += t.size();
  }
  out << "blob " << total << "\n";
  for (const std::string& name : ps.names()) {
    const Tensor& t = ps.at(name);
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size()) * 8);
  }
  if (!out) throw Error("checkpoint: write to " + path + " failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path);

  auto expect_line = [&](const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("checkpoint: truncated at " + what);
    return line;
  };

  if (expect_line("header") != "relkit-checkpoint v1") {
    throw ParseError("checkpoint: " + path + " is not a relkit-checkpoint v1 file");
  }

  std::istringstream meta(expect_line("manifest size"));
  std::string tag;
  std::size_t manifest_bytes = 0;
  if (!(meta >> tag >> manifest_bytes) || tag != "manifest") {
    throw ParseError("checkpoint: bad manifest header");
  }
  std::string manifest_text(manifest_bytes, '\0');
  in.read(manifest_text.data(), static_cast<std::streamsize>(manifest_bytes));
  if (!in || in.get() != '\n') throw ParseError("checkpoint: truncated manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: bad manifest JSON: ") + e.what());
  }

  Checkpoint ck;
  try {
    if (manifest.at("format_version").get<int>() != 1) {
      throw ParseError("checkpoint: unsupported format version");
    }
    ck.step = manifest.at("step").get<std::int64_t>();
    ck.config = TrainConfig::from_json(manifest.at("config"));
    ck.schema_names = manifest.at("schema").get<std::vector<std::string>>();
    ck.vocab_tokens = manifest.at("vocab").get<std::vector<std::string>>();
    ck.vocab_hash =
        std::stoull(manifest.at("vocab_hash").get<std::string>(), nullptr, 16);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: incomplete manifest: ") + e.what());
  } catch (const std::logic_error&) {
    throw ParseError("checkpoint: bad vocab_hash field");
  }

  std::istringstream tensors_meta(expect_line("tensor count"));
  std::size_t count = 0;
  if (!(tensors_meta >> tag >> count) || tag != "tensors") {
    throw ParseError("checkpoint: bad tensor header");
  }
  struct Entry {
    std::string name;
    std::vector<int> shape;
  };
  std::vector<Entry> entries;
  std::int64_t expected_total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream line(expect_line("tensor list"));
    Entry e;
    int rank = 0;
    if (!(line >> e.name >> rank) || rank < 0 || rank > 2) {
      throw ParseError("checkpoint: bad tensor entry");
    }
    std::int64_t n = 1;
    for (int d = 0; d < rank; ++d) {
      int dim = 0;
      if (!(line >> dim) || dim <= 0) throw ParseError("checkpoint: bad tensor shape");
      e.shape.push_back(dim);
      n *= dim;
    }
    expected_total += n;
    entries.push_back(std::move(e));
  }

  std::istringstream blob_meta(expect_line("blob header"));
  std::int64_t total = 0;
  if (!(blob_meta >> tag >> total) || tag != "blob" || total != expected_total) {
    throw ParseError("checkpoint: blob size does not match tensor list");
  }
  for (const Entry& e : entries) {
    Tensor t = e.shape.empty() ? Tensor::scalar(0.0) : Tensor(e.shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size()) * 8);
    if (!in) throw ParseError("checkpoint: truncated blob at " + e.name);
    if (!t.all_finite()) throw NumericError("checkpoint: non-finite values in " + e.name);
    ck.params.add(e.name, std::move(t));
  }
  return ck;
}

// Rebuilds a runnable model; parameter names and shapes must match the
// layout the manifest's config implies.
inline Model model_from_checkpoint(const Checkpoint& ck) {
  const Vocab vocab = Vocab::from_ordered(ck.vocab_tokens);
  if (vocab.hash() != ck.vocab_hash) {
    throw ParseError("checkpoint: vocab hash mismatch (corrupted manifest?)");
  }
  Model model(ck.config, vocab, RelationSchema(ck.schema_names));
  model.init_params(0);
  ParamStore& ps = model.params();
  if (ps.size() != ck.params.size()) {
    throw ParseError("checkpoint: parameter count does not match model layout");
  }
  for (const std::string& name : ps.names()) {
    if (!ck.params.has(name)) throw ParseError("checkpoint: missing parameter " + name);
    const Tensor& t = ck.params.at(name);
    if (!ps.at(name).same_shape(t)) {
      throw ParseError("checkpoint: shape mismatch for " + name);
    }
    ps.at(name) = t;
  }
  return model;
}

}  // namespace relkit
