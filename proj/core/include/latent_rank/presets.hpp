#pragma once

// Built-in models.
//
//   sbmtmm          reduced-group split-ballot CTUM MTMM (3 traits x 3 methods, two groups),
//                   residual labels psi1..psi9 laid out as in the published Jacobian table
//   sbmtmm-pervar   same model with one residual variance per observed variable
//                   (group 2: y13 -> psi7, y23 -> psi8, y33 -> psi9, y31 shares psi5)
//   appendix-mtmm   single-group 9-indicator CTUM model written with y1..y9 and auto labels
//   shapiro         three indicators, y = Lambda eta with Lambda = [lambda | diag(psi)], Psi = 0
//   shapiro-direct  three indicators, sigma_jj = lambda_j^2 + psi_j with psi_j a free variance
//
// SB-MTMM free order: l11 l21 l31 l12 l22 l32 l13 l23 l33 psi1..psi9 r12 r13 r23 phi4 phi5 phi6,
// where l_tm is the loading of trait t measured by method m.

#include "latent_rank/identification.hpp"
#include "latent_rank/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace latent_rank {

[[nodiscard]] std::vector<std::string> preset_names();
[[nodiscard]] bool has_preset(const std::string& name);

/// DSL text of a preset; throws std::invalid_argument for unknown names.
[[nodiscard]] std::string preset_text(const std::string& name);
/// Parsed preset, with the documented free order applied.
[[nodiscard]] ModelSpec preset(const std::string& name);
/// Number of groups the preset text is written for.
[[nodiscard]] std::size_t preset_groups(const std::string& name);

/// The single-group 9-indicator model with trait correlations started at (0.5-d, 0.5+d, 0.5).
[[nodiscard]] std::string appendix_model_text(double d);

// ---------------------------------------------------------------------------
// SB-MTMM parameter points

struct SbMtmmPoint {
    double lambda = 1.0;  // every loading
    double rho12 = 0.5;
    double rho13 = 0.5;
    double rho23 = 0.5;
    double phi = 1.0;  // every method variance
    double psi = 1.0;  // every residual variance
};

/// Theta for either SB-MTMM preset at a common-loading point.
[[nodiscard]] Theta sbmtmm_theta(const ModelSpec& spec, const SbMtmmPoint& point);
/// Generating parameters: loadings 1, correlations (0.5-delta, 0.5, 0.5+delta), unit variances.
[[nodiscard]] Theta sbmtmm_population_theta(const ModelSpec& spec, double delta);
/// Loading, residual, correlation and method-variance roles for the nullspace pattern check.
[[nodiscard]] PodRoles sbmtmm_roles(const ModelSpec& spec);

// ---------------------------------------------------------------------------
// Shapiro parameter points

/// lambda = (1, 0.4, 0.7); psi = (1, 0.3, 0) for "shapiro", (1, 0.09, 0) for "shapiro-direct".
[[nodiscard]] Theta shapiro_population_theta(const ModelSpec& spec);

/// Family used by rank scans of a preset: SB-MTMM presets vary delta in the population
/// correlations, Shapiro presets vary psi3. nullopt for presets without a family.
[[nodiscard]] std::optional<ThetaFamily> preset_family(const std::string& name);

}  // namespace latent_rank
