#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vuldat/config.hpp"

namespace vuldat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // usage and configuration errors
inline constexpr int kExitData = 2;     // malformed, inconsistent or unreadable data
inline constexpr int kExitBackend = 3;  // embedding backend transport/protocol failures

inline constexpr const char* kRunManifestName = "run_manifest.json";

/// Runs one subcommand. `args` excludes the program name. Machine-readable
/// results go to `out`, logs and usage text to `err`.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_subcommand(int argc, const char* const* argv);

/// Contents of run_manifest.json: config hash and canonical config, the
/// snapshot manifest (when known) and a hash per output file. No timestamps.
std::string run_manifest_json(const std::string& subcommand, const RunConfig& config,
                              const std::filesystem::path& snapshot_dir,
                              const std::filesystem::path& out_dir,
                              const std::vector<std::string>& outputs);

}  // namespace vuldat::cli
