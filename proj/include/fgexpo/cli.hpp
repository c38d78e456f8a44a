#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

#include "fgexpo/core.hpp"
#include "fgexpo/testbed.hpp"

namespace fgexpo {

enum class Command { kGenBank, kTrain, kEval, kAblate, kTraceCurriculum, kCompare };

std::optional<Command> parse_command(std::string_view name);
std::string_view command_name(Command c);

/// Process exit statuses; each failure class has its own code.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitMissingFile = 3,
  kExitInvalidConfig = 4,
  kExitOutputNotEmpty = 5,
  kExitInvariant = 6,
  kExitIo = 7,
};

class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ExperimentManifest {
  Command command = Command::kTrain;
  std::optional<std::filesystem::path> config;
  /// When absent, the bank is generated in-process from `generation`.
  std::optional<std::filesystem::path> bank;
  BankSpec generation;
  std::uint64_t bank_seed = 0;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  /// Inclusive seed range for compare.
  std::pair<std::uint64_t, std::uint64_t> seeds{0, 9};
  int k = 8;
  double eval_temperature = 0.6;
  /// eval: trained policy to score; defaults to the bank's initial policy.
  std::optional<std::filesystem::path> params;
  /// trace-curriculum: input curriculum.csv.
  std::optional<std::filesystem::path> trace;
};

/// Parses "N..M" (or a single "N").
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text);

/// Runs one command, writing artifacts under manifest.out (which must be
/// absent or empty). Diagnostics go to `log`. Returns an ExitCode.
int run_command(const ExperimentManifest& manifest, std::ostream& log);

}  // namespace fgexpo
