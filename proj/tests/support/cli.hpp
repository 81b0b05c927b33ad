#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace pcmeta::testing {

struct CliResult {
  int code = -1;
  std::string output;  ///< stdout and stderr interleaved
};

/// Runs the pcmeta binary with `args` (already shell-quoted where needed).
inline CliResult run_cli(const std::string& binary, const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = "'" + binary + "' " + args + " > '" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

inline std::string quote(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace pcmeta::testing
