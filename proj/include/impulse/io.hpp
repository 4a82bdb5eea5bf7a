#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "impulse/montecarlo.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/strategy.hpp"

namespace impulse {

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything a config file carries besides the problem itself.
struct RunSettings {
  Grid grid;
  SolverOptions solver;
  double epsilon = 1e-6;
  bool epsilon_given = false;  // false: epsilon follows 10 * tol
  McOptions mc;
  int max_impulses = 64;
  State start;
  FixedCadence cadence;
};

struct ProblemConfig {
  ProblemSpec spec;
  RunSettings run;
  std::uint64_t hash = 0;  // FNV-1a of the config text
};

/// INI text with sections [regimes] [dynamics] [profit] [cost] [kernel]
/// [discount] [grid] [solve] [mc] [strategy]. Throws ConfigError.
ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::filesystem::path& path);

std::uint64_t fnv1a(const std::string& text);
std::string hex_hash(std::uint64_t hash);

/// "%.17g"; infinities as inf / -inf.
std::string format_number(double v);

/// First line of every CSV written by the tool.
std::string provenance_line(std::uint64_t spec_hash);

void write_value_fields(std::ostream& out, const ValueFields& fields, std::uint64_t spec_hash);
void write_value_fields(const std::filesystem::path& path, const ValueFields& fields, std::uint64_t spec_hash);

struct LoadedFields {
  ValueFields fields;
  std::uint64_t spec_hash = 0;
};

/// Inverse of write_value_fields. Throws FileNotFound or ConfigError.
LoadedFields read_value_fields(const std::filesystem::path& path);
LoadedFields read_value_fields(std::istream& in);

void write_regions(const std::filesystem::path& path, const Region& region, std::uint64_t spec_hash);

struct TraceRow {
  std::size_t episode = 0;
  StrategyTrace trace;
};

void write_traces(const std::filesystem::path& path, const std::vector<TraceRow>& rows, std::uint64_t spec_hash);
void write_episode_summary(const std::filesystem::path& path, const std::vector<EpisodeSummary>& episodes,
                           std::uint64_t spec_hash);
void write_gain_estimate(const std::filesystem::path& path, const std::string& strategy_name,
                         const GainEstimate& estimate, std::uint64_t spec_hash);
void write_path_dump(const std::filesystem::path& path, const std::vector<TraceRow>& rows, std::uint64_t spec_hash);
void write_audit_states(const std::filesystem::path& path, const AuditReport& report, std::uint64_t spec_hash);

}  // namespace impulse
