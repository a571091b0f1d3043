#pragma once

// Text checkpoints. Layout:
//
//   PCDGAN-CHECKPOINT v1
//   arch <16 hex digits>
//   meta <key> <value>          (zero or more)
//   param <name> <rank> <dims...>
//   <values as hex floats, space separated>
//   ...
//   end
//
// Hex floats make save -> load bit exact.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcdgan/autodiff.hpp"
#include "pcdgan/nn.hpp"

namespace pcdgan::nn {

inline constexpr const char* kCheckpointMagic = "PCDGAN-CHECKPOINT v1";

struct SavedParam {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::uint64_t arch_hash = 0;
  std::map<std::string, std::string> meta;
  std::vector<SavedParam> params;
};

std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t v);

Checkpoint snapshot(std::uint64_t arch_hash, const std::vector<Parameter>& params);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Throws LoadError on a missing file, bad magic or malformed body.
Checkpoint load_checkpoint(const std::string& path);
// Copies values by name into `params`. Throws LoadError on an architecture
// hash mismatch, a missing name, or a shape mismatch.
void restore(const Checkpoint& ckpt, std::uint64_t expected_arch_hash,
             const std::vector<Parameter>& params);

}  // namespace pcdgan::nn
