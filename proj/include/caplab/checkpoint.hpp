#ifndef CAPLAB_CHECKPOINT_HPP
#define CAPLAB_CHECKPOINT_HPP

#include <map>
#include <string>

#include "caplab/data.hpp"
#include "caplab/model.hpp"

namespace caplab {

// Model checkpoint: magic "CAPP", u32 header length, JSON header (kind,
// sizes, vocabulary + hash, flags), then one record per parameter:
// u32 name length, name bytes, u32 rank, u32 dims..., float64 LE values.
struct Checkpoint {
  CaptionModel model;
  Vocabulary vocab;
  std::map<std::string, std::string> flags;  // free-form provenance (fingerprint, transfer mode, ...)
};

void save_checkpoint(const std::string& path, const CaptionModel& model,
                     const Vocabulary& vocab,
                     const std::map<std::string, std::string>& flags = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace caplab

#endif
