#pragma once

#include "urcod/nn/layers.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace urcod {

/// Versioned binary container of named parameter arrays plus string metadata.
/// Shared by the PEG, PMG and UAMR models; save -> load -> save is
/// byte-identical.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, nn::Tensor>> params;

  void add_params(const nn::ParamList& list);
  /// Copies stored values into matching parameters; throws when a name is
  /// missing or a shape differs.
  void restore_params(const nn::ParamList& list) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  std::string meta_at(const std::string& key) const;
  double meta_num(const std::string& key) const;
};

}  // namespace urcod
