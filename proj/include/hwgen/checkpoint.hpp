#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hwgen/autograd.hpp"

namespace hwgen {

class ParamSet;

// Versioned container: parameter id -> shape + little-endian values, plus a
// string key/value config record. Layout is documented in
// docs/checkpoint-format.md.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& id) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies every parameter of `params` into the checkpoint.
void append_params(Checkpoint& ckpt, const ParamSet& params);
// Loads values for every parameter of `params`; missing ids or shape
// mismatches throw DataError.
void restore_params(const Checkpoint& ckpt, ParamSet& params);

}  // namespace hwgen
