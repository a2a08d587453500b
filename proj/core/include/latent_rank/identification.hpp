#pragma once

// Rank, nullspace and information diagnostics for the Jacobian of the implied moments.

#include "latent_rank/estimation.hpp"
#include "latent_rank/jacobian.hpp"
#include "latent_rank/model.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace latent_rank {

struct JacobianReport {
    Matrix jacobian;
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    Vector singular_values;  // descending
    std::size_t rank = 0;
    double tolerance = 0.0;
    Matrix nullspace;  // p x (p - rank), orthonormal columns

    [[nodiscard]] std::size_t deficiency() const noexcept {
        return static_cast<std::size_t>(nullspace.cols());
    }
};

/// SVD rank. With no `absolute_tol` the threshold is max(p*, p) * sigma_max * eps.
[[nodiscard]] JacobianReport rank_report(const Matrix& delta, std::optional<double> absolute_tol = std::nullopt);
/// Same, with row/column labels taken from `spec`.
[[nodiscard]] JacobianReport rank_report(const ModelSpec& spec, const Theta& theta,
                                         std::optional<double> absolute_tol = std::nullopt);

struct AffectedSet {
    std::vector<std::string> affected;
    std::vector<std::string> orthogonal;
    /// Max-abs component over the unit-normalized nullspace basis, per free label.
    std::vector<std::pair<std::string, double>> components;
};

/// Labels whose nullspace components all fall below `threshold` are orthogonal to the deficiency.
[[nodiscard]] AffectedSet affected_params(const JacobianReport& report, double threshold = 1e-8);

struct InformationReport {
    Matrix information;
    double condition_number = 0.0;
    bool singular = true;
    std::optional<Matrix> asymptotic_variance;
    std::vector<std::optional<double>> standard_errors;
};

/// I = sum_g w_g Delta_g' V_g Delta_g. When cond(I) < threshold, Asy.Var = I^-1 / total_n.
[[nodiscard]] InformationReport fisher_information(const Matrix& delta, const WeightMatrix& v,
                                                   const std::vector<double>& group_weights, double total_n,
                                                   double singularity_threshold = 1e12);

// ---------------------------------------------------------------------------
// Split-ballot point-of-deficiency pattern

enum class PodRole {
    LoadingMethod1,
    LoadingOther,
    ResidualMethod1,
    ResidualOther,
    TraitCorrelation,
    MethodVariance1,
    MethodVarianceOther,
};

using PodRoles = std::map<std::string, PodRole>;

struct PatternComponent {
    std::string label;
    double expected = 0.0;
    double observed = 0.0;
};

struct PatternCheck {
    /// False when the Jacobian is full rank at the supplied point.
    bool applicable = false;
    bool passed = false;
    std::size_t deficiency = 0;
    double lambda = 0.0;
    double rho = 0.0;
    std::vector<PatternComponent> components;
    std::string detail;
};

/// Compares the 1-dimensional nullspace at an equal-loading / equal-correlation point with
///   +1/(2 lambda rho) on method-1 loadings, -1/(2 lambda rho) on other loadings,
///   +(rho-1)/rho on method-1 residual variances, -(rho-1)/rho on the others,
///   0 on trait correlations, (-1, 1, 1) on the method variances,
/// after rescaling so the method-1 variance component is -1. Tolerance 1e-8.
[[nodiscard]] PatternCheck nullspace_pattern_check(const ModelSpec& spec, const Theta& theta,
                                                   const PodRoles& roles, double tol = 1e-8);

// ---------------------------------------------------------------------------

struct RankScanRow {
    double delta = 0.0;
    double smallest_singular_value = 0.0;
    std::size_t rank = 0;
    std::size_t num_params = 0;
    double condition_number = 0.0;
};

using ThetaFamily = std::function<Theta(double)>;

[[nodiscard]] std::vector<RankScanRow> rank_scan(const ModelSpec& spec, const ThetaFamily& family,
                                                 const std::vector<double>& grid,
                                                 std::optional<double> absolute_tol = std::nullopt);

}  // namespace latent_rank
