#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "csc/lexicon.h"
#include "csc/model.h"

namespace csc {

// Optimizer/resume state carried alongside the model parameters.
struct TrainerState {
  std::int64_t global_step = 0;
  Parameters m;  // AdamW first moment (zero-sized for SGD)
  Parameters v;  // AdamW second moment
  bool has_moments = false;
};

// Versioned JSON container: config, named parameter tensors and the
// fingerprint of the lexicon the model was trained against.
void save_checkpoint(const std::string& path, const Model& model, std::uint64_t lexicon_fingerprint,
                     const TrainerState* trainer = nullptr);

struct LoadedCheckpoint {
  Model model;
  std::optional<TrainerState> trainer;
};

// Throws DataError when the stored fingerprint does not match the lexicon.
LoadedCheckpoint load_checkpoint(const std::string& path, const Lexicon& lex);

}  // namespace csc
