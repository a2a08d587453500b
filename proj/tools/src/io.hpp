#pragma once

// Input files of the command-line tool.
//
// Covariance file: one block per group, blocks separated by blank lines.
//   y1 y2 y3          variable names
//   1.0 0.5 0.4       q rows of q values (whitespace or comma separated)
//   ...
//   n=200
//
// Data file: CSV with a header row; an optional `group` column (1-based) assigns rows to
// groups. Only the columns a group's model uses are read; they must be numeric.
//
// Config file: `key = value` lines, `#` comments, lists comma-separated.

#include "latent_rank/model.hpp"
#include "latent_rank/simulation.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace latent_rank::cli {

/// Bad flags, malformed files or models (exit 64).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing or unreadable input files (exit 66).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

[[nodiscard]] std::string read_text_file(const std::string& path);

struct CovarianceBlock {
    std::vector<std::string> names;
    Matrix matrix;
    double n = 0.0;
};

/// Throws UsageError with a line number on malformed input or asymmetry beyond 1e-8.
[[nodiscard]] std::vector<CovarianceBlock> parse_covariance_text(const std::string& text);
/// Reorders each block to the model's observed order. Blocks map to groups in order.
[[nodiscard]] SampleMoments moments_for_spec(const std::vector<CovarianceBlock>& blocks, const ModelSpec& spec);
/// Writes blocks in the format parse_covariance_text reads.
[[nodiscard]] std::string format_covariance_text(const std::vector<CovarianceBlock>& blocks);

/// Per-group covariances (denominator n_g) from raw CSV data.
[[nodiscard]] SampleMoments moments_from_csv(const std::string& text, const ModelSpec& spec);

using KeyValues = std::map<std::string, std::string>;
[[nodiscard]] KeyValues parse_key_values(const std::string& text);

/// Applies keys experiment, n_grid, delta_grid, nsim, seed, optimizer, tol, max_iter,
/// threads, svg to `config`. Returns the svg flag. Unknown keys are a UsageError.
bool apply_sim_config(const KeyValues& kv, SimConfig& config);

[[nodiscard]] Optimizer parse_optimizer(const std::string& name);
[[nodiscard]] std::vector<double> parse_double_list(const std::string& text);
[[nodiscard]] std::vector<std::size_t> parse_size_list(const std::string& text);

/// `label = value` lines, or a fit report JSON with a "theta" object.
[[nodiscard]] Theta parse_theta(const std::string& text, const ModelSpec& spec);

}  // namespace latent_rank::cli
