#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace neurorate::cli {

/// Lowercase hex SHA-256 of a byte string or a file's contents.
[[nodiscard]] std::string sha256_hex(const std::string& bytes);
[[nodiscard]] std::string sha256_file(const std::filesystem::path& path);

/// Writes <out>/manifest-<subcommand>.json: subcommand, seed, threads,
/// canonical config and its hash, library versions, and each artifact's
/// path (relative to out), size and checksum. Returns the manifest path.
std::filesystem::path write_manifest(const RunConfig& config, const std::string& subcommand,
                                     const std::vector<std::filesystem::path>& artifacts);

} // namespace neurorate::cli
