#pragma once

// Flat named-parameter checkpoints. Layout (all integers unsigned 64-bit
// little-endian):
//
//   "RAPNET1"                         7 bytes
//   config length, config bytes       UTF-8 key=value lines (ModelConfig::to_text)
//   parameter count
//   per parameter:
//     name length, name bytes
//     rank, extents[rank]
//     values                          little-endian IEEE-754 doubles, row-major

#include "rapnet/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>

namespace rapnet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[] = "RAPNET1";

void write_checkpoint(std::ostream& out, const ResponseModel& model);
std::unique_ptr<ResponseModel> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ResponseModel& model);
std::unique_ptr<ResponseModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace rapnet
