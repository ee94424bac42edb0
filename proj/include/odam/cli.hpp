#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "odam/evalkit.hpp"
#include "odam/synthdata.hpp"
#include "odam/trainloop.hpp"

namespace odam {

/// Everything one experiment needs: data scenario, training and evaluation
/// options. `seed` drives both data generation and training.
struct RunConfig {
    ToySpec toy;
    TrainConfig train;
    double inlier_threshold = 0.5;
    std::vector<std::string> directions{"t2s", "s2s", "t2t"};

    std::uint64_t seed() const { return train.seed; }
    void set_seed(std::uint64_t seed);
    void validate() const;
};

/// Bad command-line or config input; the front end exits with status 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `key = value` per line, `#` starts a comment. Keys not listed by
/// config_keys() are rejected with the line number.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, one `key = value` line each, in the
/// order of config_keys(). Parsing the output gives back the same config.
std::string echo_config(const RunConfig& config);
std::vector<std::string> config_keys();

std::vector<std::string> parse_directions(std::string_view list);

/// Per-target inlier state as saved by `train`: `w p1 p2 p3 class` per line.
void write_state(const TargetState& state, const std::filesystem::path& path);
TargetState read_state(const std::filesystem::path& path);

// -- commands --------------------------------------------------------------
// Each returns normally when every artifact was written and throws otherwise.
// Progress goes to `log`.

/// <out>/source.data, <out>/target.data, <out>/config.echo.
DomainData cmd_gen(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

/// <out>/config.echo, <out>/train.log, <out>/checkpoint, <out>/state.
TrainReport cmd_train(const RunConfig& config, const std::filesystem::path& source_path,
                      const std::filesystem::path& target_path, const std::filesystem::path& out, std::ostream& log);

struct EvalSummary {
    std::vector<DirectionReport> directions;
    DetectionScores outliers;
    std::size_t target_outliers = 0;  // ground-truth count
};

/// Reads <run>/checkpoint and, when present, <run>/state. Writes
/// <run>/eval/<direction>.report, <run>/pr/<direction>.dat and
/// <run>/eval/outliers.report.
EvalSummary cmd_eval(const RunConfig& config, const std::filesystem::path& run,
                     const std::filesystem::path& source_path, const std::filesystem::path& target_path,
                     std::ostream& log);

/// One sweep cell result.
struct CellResult {
    double ratio = 0.0;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::DAOutlierDetection;
    double map_t2s = 0.0;
    double map_s2s = 0.0;
    double map_t2t = 0.0;
    double f1 = 0.0;
    double init_f1 = 0.0;
};

/// Generates, trains and evaluates one (ratio, seed, mode) cell under `dir`.
CellResult run_cell(const RunConfig& config, double ratio, std::uint64_t seed, TrainMode mode,
                    const std::filesystem::path& dir, std::ostream& log);

/// Cells for every (ratio, seed) and the two modes da-outlier-detection and
/// siamese-da-out. <out>/table.txt gets one row per finished cell as it
/// completes; <out>/summary.txt gets mean and sample standard deviation per
/// (ratio, mode). Throws UsageError on an empty ratio or seed list.
std::vector<CellResult> cmd_sweep(const RunConfig& config, const std::vector<double>& ratios,
                                  const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out,
                                  std::ostream& log);

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace odam
