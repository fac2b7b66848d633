#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "neurorate/error.hpp"
#include "run_config.hpp"

namespace neurorate::cli {

/// A module error annotated with the subcommand it came from.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message)
        : Error(stage + ": " + message), stage_(std::move(stage)) {}
    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct CommandOptions {
    bool emit_png = false;       // topomap: per-band images
    std::size_t png_window = 0;  // topomap: window rendered per trial
};

[[nodiscard]] const std::vector<std::string>& subcommand_names();

/// Runs one subcommand, writes its manifest and returns every artifact
/// (manifest last). Errors come back as StageError.
std::vector<std::filesystem::path> run_command(const std::string& name, const RunConfig& config,
                                               const CommandOptions& options = {});

// Output locations, relative to config.out.
namespace layout {
inline const std::filesystem::path kDatasetDir = "dataset";
inline const std::filesystem::path kModelDir = "model";
inline const std::filesystem::path kTrainDir = "train";
inline const std::filesystem::path kEvalDir = "eval";
inline const std::filesystem::path kReportDir = "report";
} // namespace layout

/// Reads "key = value" lines of a metrics or summary file; the value of
/// the first line with that key.
[[nodiscard]] std::string read_metric(const std::filesystem::path& file, const std::string& key);

} // namespace neurorate::cli
