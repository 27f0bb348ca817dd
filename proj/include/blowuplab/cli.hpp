#pragma once

// Batch command-line front end: constants, kirchhoff, balance, radial, check.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace blowup::cli {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitScience = 2;

/// Bad flags, unreadable or malformed configuration.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string command;
  int n = 0;  // 0 until set by --dim or the config's "dim"
  nlohmann::json raw = nlohmann::json::object();
  std::string config_path;
  std::string out_dir;  // empty: primary output goes to stdout
  std::string format = "json";
  bool allow_negative = false;
  std::uint64_t seed = 1;
};

/// Parses a JSON file; malformed input raises InputError naming path:line:column.
nlohmann::json load_config(const std::string& path);

/// Line and column (1-based) of a byte offset in `text`.
std::pair<int, int> line_column(const std::string& text, std::size_t byte_offset);

/// %.12e.
std::string format_double(double x);

/// Worker cap from BLOWUPLAB_THREADS (>= 1), defaulting to hardware concurrency.
int worker_count();

/// Runs tasks on at most worker_count() threads; results keep task order.
std::vector<nlohmann::json> run_ordered(const std::vector<std::function<nlohmann::json()>>& tasks);

int cmd_constants(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_kirchhoff(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_balance(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_radial(const ExperimentConfig& config, std::ostream& out, std::ostream& err);
int cmd_check(const ExperimentConfig& config, std::ostream& out, std::ostream& err);

/// Full entry point: flag parsing, dispatch and exit-code mapping.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace blowup::cli
