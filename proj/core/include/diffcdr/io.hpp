#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "diffcdr/param_store.hpp"

namespace diffcdr {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `contents` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

/// {"format_version": 1, "params": {name: {"shape": [...], "data": [...]}}}
nlohmann::json params_to_json(const ParamStore& store);
ParamStore params_from_json(const nlohmann::json& doc);

void save_params(const std::filesystem::path& path, const ParamStore& store);
ParamStore load_params(const std::filesystem::path& path);

/// Loads values from `path` into an existing store; names and shapes must match.
void load_params_into(const std::filesystem::path& path, ParamStore& store);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace diffcdr
