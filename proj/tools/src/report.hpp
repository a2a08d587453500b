#pragma once

// Report writers. Every function returns the file contents so output is testable and
// byte-stable: numbers go through to_chars (shortest round-trip form), NaN is written
// as NA in CSV and null in JSON.

#include "latent_rank/estimation.hpp"
#include "latent_rank/identification.hpp"
#include "latent_rank/model.hpp"
#include "latent_rank/simulation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace latent_rank::cli {

/// Files that could not be written (exit 73).
class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void write_file(const std::string& dir, const std::string& name, const std::string& contents);

[[nodiscard]] std::string format_number(double v);
[[nodiscard]] std::string csv_field(const std::string& s);

// ---------------------------------------------------------------------------
// fit

struct FitReport {
    const ModelSpec* spec = nullptr;
    FitResult result;
    FitConfig config;
    std::optional<InformationReport> information;
    double total_n = 0.0;
};

[[nodiscard]] std::string fit_json(const FitReport& r);
[[nodiscard]] std::string fit_text(const FitReport& r);

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseReport {
    const ModelSpec* spec = nullptr;
    Theta theta;
    JacobianReport jacobian;
    AffectedSet affected;
    InformationReport information;
    double total_n = 0.0;
    std::optional<PatternCheck> pattern;
    std::vector<std::string> notes;
};

[[nodiscard]] std::string diagnose_json(const DiagnoseReport& r);
[[nodiscard]] std::string diagnose_text(const DiagnoseReport& r);
[[nodiscard]] std::string jacobian_csv(const JacobianReport& r);
/// One row per free parameter, one column per nullspace basis vector.
[[nodiscard]] std::string nullspace_csv(const JacobianReport& r);

// ---------------------------------------------------------------------------
// rank scan

[[nodiscard]] std::string rank_scan_csv(const std::vector<RankScanRow>& rows);

// ---------------------------------------------------------------------------
// simulation

[[nodiscard]] std::string records_csv(Experiment e, const SimResult& r);
[[nodiscard]] std::string summary_csv(Experiment e, const SimResult& r);
/// Long format: one row per (condition, parameter, subset) with subset all/converged/nonconverged.
[[nodiscard]] std::string param_summary_csv(Experiment e, const SimResult& r);
[[nodiscard]] std::string summary_json(const SimConfig& config, const SimResult& r);
/// Admissibility and convergence proportions against log10 n, one series per delta, +-2 SE bars.
[[nodiscard]] std::string figure3_svg(const SimSummary& s);

[[nodiscard]] std::string histogram_csv(const std::vector<HistogramBin>& bins);
[[nodiscard]] std::string shapiro_json(const SimConfig& config, const ShapiroSummary& s);
/// Histogram of psi3 estimates; bins below zero are drawn in a second colour.
[[nodiscard]] std::string figure2_svg(const ShapiroSummary& s);

}  // namespace latent_rank::cli
