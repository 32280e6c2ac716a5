#include "csc/checkpoint.h"

#include <cstdio>
#include <fstream>

#include "csc/errors.h"
#include "json.hpp"

namespace csc {

namespace {

using nlohmann::json;

constexpr int kVersion = 1;

json tensors_to_json(const Parameters& p) {
  json out = json::object();
  p.for_each([&out](const std::string& name, const Matrix& m) {
    out[name] = {{"shape", {m.rows, m.cols}}, {"data", m.data}};
  });
  return out;
}

void tensors_from_json(const json& j, Parameters& p, const std::string& path) {
  p.for_each([&j, &path](const std::string& name, Matrix& m) {
    if (!j.contains(name)) throw DataError(path + ": checkpoint missing tensor " + name);
    const json& t = j.at(name);
    const int rows = t.at("shape").at(0).get<int>();
    const int cols = t.at("shape").at(1).get<int>();
    if (rows != m.rows || cols != m.cols) {
      throw DataError(path + ": tensor " + name + " has shape " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", expected " + std::to_string(m.rows) + "x" +
                      std::to_string(m.cols));
    }
    t.at("data").get_to(m.data);
    if (!m.finite()) throw DataError(path + ": tensor " + name + " contains non-finite values");
  });
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

json config_to_json(const BackboneConfig& cfg) {
  return {{"vocab_size", cfg.vocab_size}, {"d", cfg.d},
          {"layers", cfg.layers},         {"heads", cfg.heads},
          {"representation_tap", cfg.representation_tap}, {"seed", cfg.seed}};
}

BackboneConfig config_from_json(const json& j) {
  BackboneConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.d = j.at("d").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.representation_tap = j.at("representation_tap").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, std::uint64_t lexicon_fingerprint,
                     const TrainerState* trainer) {
  json j;
  j["version"] = kVersion;
  j["config"] = config_to_json(model.config());
  j["lexicon_fingerprint"] = fingerprint_hex(lexicon_fingerprint);
  j["tensors"] = tensors_to_json(model.params());
  if (trainer != nullptr) {
    json t;
    t["global_step"] = trainer->global_step;
    t["has_moments"] = trainer->has_moments;
    if (trainer->has_moments) {
      t["m"] = tensors_to_json(trainer->m);
      t["v"] = tensors_to_json(trainer->v);
    }
    j["trainer"] = std::move(t);
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump();
  out << '\n';
  if (!out) throw DataError("failed writing " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path, const Lexicon& lex) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path + ": invalid checkpoint JSON: " + e.what());
  }

  try {
    if (j.at("version").get<int>() != kVersion) {
      throw DataError(path + ": unsupported checkpoint version");
    }
    const std::string stored = j.at("lexicon_fingerprint").get<std::string>();
    const std::string expected = fingerprint_hex(lex.fingerprint());
    if (stored != expected) {
      throw DataError(path + ": lexicon fingerprint mismatch (checkpoint " + stored +
                      ", lexicon " + expected + ")");
    }

    const BackboneConfig cfg = config_from_json(j.at("config"));
    cfg.validate();
    Parameters params = Parameters::zeros(cfg);
    tensors_from_json(j.at("tensors"), params, path);

    LoadedCheckpoint loaded{Model(cfg, std::move(params)), std::nullopt};
    if (j.contains("trainer")) {
      const json& t = j.at("trainer");
      TrainerState state;
      state.global_step = t.at("global_step").get<std::int64_t>();
      state.has_moments = t.at("has_moments").get<bool>();
      if (state.has_moments) {
        state.m = Parameters::zeros(cfg);
        state.v = Parameters::zeros(cfg);
        tensors_from_json(t.at("m"), state.m, path);
        tensors_from_json(t.at("v"), state.v, path);
      }
      loaded.trainer = std::move(state);
    }
    return loaded;
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace csc
