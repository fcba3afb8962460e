#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "run_config.hpp"

namespace unisync::cli {

struct RunOptions {
    std::size_t jobs = 1;
    bool hard_paste = false;              // composite: raw mask, no dilate or blur
    std::filesystem::path run_dir;        // explicit run directory; derived when empty
};

/// Names of the commands `run` understands.
bool is_command(const std::string& name);

/// <out_dir>/<command>-<YYYYmmdd-HHMMSS>-<hash>
std::filesystem::path make_run_dir(const std::string& command, const RunConfig& cfg, const json& resolved);

/// Executes one command inside `run_dir` (created) after echoing resolved_config.json.
/// Returns the process exit status; errors propagate as unisync::Error.
int run(const std::string& command, const RunConfig& cfg, const json& resolved, const RunOptions& opts,
        std::ostream& out);

}  // namespace unisync::cli
