#pragma once

// Subcommand dispatch behind the kld tool. Every subcommand reads a
// RunConfig and writes fixed-schema CSV files into an output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kld/config.hpp"

namespace kld {

/// A modelling assumption or an a priori bound failed; maps to exit code 1.
class AssumptionViolation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitAssumption = 1;
inline constexpr int kExitInternal = 2;

struct DispatchOptions {
  std::optional<std::uint64_t> seed;  // overrides [simulate] seed
};

const std::vector<std::string>& subcommands();

/// Runs one subcommand; throws AssumptionViolation or any other error.
void run_subcommand(const std::string& name, const RunConfig& config, const std::filesystem::path& out_dir,
                    const DispatchOptions& options = {});

/// run_subcommand with errors reported on stderr and mapped to exit codes.
int dispatch(const std::string& name, const RunConfig& config, const std::filesystem::path& out_dir,
             const DispatchOptions& options = {});

}  // namespace kld
