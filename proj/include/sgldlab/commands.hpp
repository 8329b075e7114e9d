#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sgldlab {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitViolation = 2 };

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool allow_unsafe = false;
  std::optional<int> threads;
};

/// --threads when given, else SGLDLAB_THREADS, else the OpenMP default.
void apply_thread_count(const GlobalOptions& g);

int cmd_certify(const GlobalOptions& g, std::ostream& log);
int cmd_run(const GlobalOptions& g, std::ostream& log);
/// trace_dir defaults to the output directory when empty.
int cmd_bounds(const GlobalOptions& g, const std::string& trace_dir, std::ostream& log);
int cmd_verify(const GlobalOptions& g, std::ostream& log);
int cmd_compare(const GlobalOptions& g, const std::vector<std::string>& report_dirs,
                std::ostream& log);

}  // namespace sgldlab
