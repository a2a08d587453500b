#pragma once

// Monte Carlo harness: population models, multivariate-normal sampling, the
// split-ballot missingness design, and the two replicate-level experiments.

#include "latent_rank/estimation.hpp"
#include "latent_rank/model.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace latent_rank {

struct PopulationModel {
    GroupMatrices matrices;
    Matrix sigma;
    std::vector<std::string> observed;

    /// 9 indicators y11, y12, y13, y21, ..., y33 (y_tm: trait t, method m); all loadings 1,
    /// trait correlations (0.5-delta, 0.5, 0.5+delta), method variances 1, Psi = I.
    [[nodiscard]] static PopulationModel sbmtmm(double delta);
    /// 3 indicators, lambda = (1, 0.4, 0.7), residual variances (1, 0.09, 0).
    [[nodiscard]] static PopulationModel shapiro();
};

using Rng = std::mt19937_64;

/// n x q rows drawn i.i.d. from MVN(0, sigma) through the Cholesky factor.
/// Throws NotPositiveDefinite when sigma has no Cholesky factor.
[[nodiscard]] Matrix mvn_sample(const Matrix& sigma, std::size_t n, Rng& rng);

/// Covariance with denominator n (rows are observations).
[[nodiscard]] Matrix sample_covariance(const Matrix& data);

/// The first floor(n/2) rows keep methods 1 and 2 (y11 y12 y21 y22 y31 y32), the rest keep
/// methods 1 and 3 (y11 y13 y21 y23 y31 y33). Throws std::invalid_argument for != 9 columns.
[[nodiscard]] SampleMoments split_ballot_moments(const Matrix& data);

enum class Experiment { SbMtmm, Shapiro };
[[nodiscard]] const char* to_string(Experiment e);

struct SimCondition {
    std::size_t n = 0;
    double delta = 0.0;
};

struct SimConfig {
    Experiment experiment = Experiment::SbMtmm;
    std::vector<std::size_t> n_grid{50, 75, 100, 500, 1000, 10000, 100000};
    std::vector<double> delta_grid{0.0, 0.01, 0.05, 0.1, 0.2, 0.3};
    std::size_t nsim = 200;
    std::uint64_t seed = 3452;
    FitConfig fit;
    /// 0: LATENT_RANK_THREADS if set, otherwise hardware concurrency.
    std::size_t threads = 0;

    /// Throws std::invalid_argument for empty grids, nsim == 0, n < 4 or delta < 0.
    void check() const;
    /// Full factorial in (n, delta) order; SHAPIRO ignores the delta grid.
    [[nodiscard]] std::vector<SimCondition> conditions() const;
};

/// Defaults for an experiment: the SB-MTMM preset is fitted with weights refreshed from
/// Sigma(theta) each iteration (normal-theory ML); Shapiro likewise.
[[nodiscard]] SimConfig default_sim_config(Experiment e);

struct SimRecord {
    SimCondition condition;
    std::size_t condition_index = 0;
    std::size_t replicate = 0;
    bool converged = false;
    /// One of the StopReason names, or "DATA_DEGENERATE" when a group covariance is not PD.
    std::string stop_reason;
    bool admissible = false;
    Vector theta;  // NaN when the data were degenerate
    double loss = 0.0;
    int iterations = 0;
    /// Per free parameter, whether a normal-theory SE exists at theta (Shapiro only).
    std::vector<bool> se_available;
};

/// Stream seed for one replicate; depends only on (master seed, n, delta, replicate).
[[nodiscard]] std::uint64_t replicate_seed(std::uint64_t master, const SimCondition& c, std::size_t replicate);

/// Model fitted by an experiment: "sbmtmm-pervar" or "shapiro-direct".
[[nodiscard]] ModelSpec experiment_spec(Experiment e);
/// Start values: DSL defaults; SB-MTMM trait correlations start at (0.5-delta, 0.5, 0.5+delta).
[[nodiscard]] Theta experiment_start(Experiment e, const ModelSpec& spec, double delta);

[[nodiscard]] SimRecord run_replicate(const SimConfig& config, const ModelSpec& spec, const SimCondition& condition,
                                      std::size_t condition_index, std::size_t replicate);

struct Stats {
    std::size_t count = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample sd (n - 1); 0 for count < 2
};

[[nodiscard]] Stats summarize(const std::vector<double>& values);

struct ParamSummary {
    std::string label;
    Stats all;
    Stats converged;
    Stats nonconverged;
};

struct ConditionSummary {
    SimCondition condition;
    std::size_t nsim = 0;
    std::size_t n_converged = 0;
    std::size_t n_admissible = 0;
    std::size_t n_degenerate = 0;
    double prop_converged = 0.0;
    double se_converged = 0.0;
    double prop_admissible = 0.0;
    double se_admissible = 0.0;
    std::vector<ParamSummary> params;
};

/// sqrt(p (1 - p) / nsim)
[[nodiscard]] double proportion_se(double p, std::size_t nsim);

struct SimSummary {
    std::vector<ConditionSummary> conditions;
};

struct SimResult {
    std::vector<std::string> labels;
    std::vector<SimRecord> records;  // ordered by (condition, replicate)
    SimSummary summary;
};

[[nodiscard]] SimSummary summarize_records(const std::vector<std::string>& labels,
                                           const std::vector<SimCondition>& conditions,
                                           const std::vector<SimRecord>& records);

/// Runs every (condition, replicate); replicates may run concurrently, output order is fixed.
[[nodiscard]] SimResult run_experiment(const SimConfig& config);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

struct ShapiroSummary {
    SimResult result;
    /// Over replicates with finite estimates.
    double fraction_psi3_negative = 0.0;
    Stats psi3;
    std::vector<HistogramBin> histogram;
    /// Fraction of replicates with an available SE, per free parameter.
    std::vector<std::pair<std::string, double>> se_availability;
};

[[nodiscard]] std::vector<HistogramBin> histogram(const std::vector<double>& values, std::size_t bins);

/// Requires config.experiment == SHAPIRO.
[[nodiscard]] ShapiroSummary shapiro_experiment(const SimConfig& config);

/// Worker count after applying config.threads and LATENT_RANK_THREADS.
[[nodiscard]] std::size_t resolve_threads(std::size_t requested);

}  // namespace latent_rank
