#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ice/embed_net.hpp"

namespace ice {

// A checkpoint is two files: a `key = value` text manifest and a flat blob
// of little-endian IEEE-754 doubles in MlpParameters declaration order. The
// manifest names the blob (param_file) relative to its own directory.
struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  // Extra hyper-parameters, written in order after the fixed keys.
  std::vector<std::pair<std::string, std::string>> hyper;
};

struct Checkpoint {
  MlpEmbedder net;
  CheckpointMeta meta;
};

// Writes `manifest` and `<manifest stem>.bin` beside it. Throws IoError.
void save_checkpoint(const std::filesystem::path& manifest, const MlpEmbedder& net,
                     const CheckpointMeta& meta);

// Throws IoError on unreadable files and InvalidArgument on a malformed
// manifest or a blob whose size disagrees with the layer shapes.
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

void write_parameter_blob(std::ostream& out, const MlpParameters& params);
void read_parameter_blob(std::istream& in, MlpParameters& params);

}  // namespace ice
