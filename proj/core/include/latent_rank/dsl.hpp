#pragma once

// Text model syntax.
//
//   # comment
//   T1 =~ y1 + 0.8*y2 + l3*y3 + start(0.7)*y4     loadings of latent T1
//   T1 ~~ 1*T1 + r12*T2                           (co)variances
//   group: 2                                      following lines apply to group 2 only
//
// Term modifiers: a number fixes the slot, an identifier labels it (slots sharing
// a label are constrained equal), start(v) sets the start value. Statements end
// at a newline or ';'. Lines before any `group:` header apply to every group in
// which all their variables exist, and their auto-generated labels are shared.
//
// Defaults: unlabeled loadings are free with start 0.5; unlisted variances of
// observed and latent variables are added free (start 1); every other cell is
// fixed at 0. The first loading of a latent is not fixed automatically.

#include "latent_rank/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace latent_rank {

struct ModelSource {
    std::string text;
    std::size_t groups = 1;
};

enum class Severity { Error, Warning };

struct ParseDiagnostic {
    std::size_t line = 1;    // 1-based
    std::size_t column = 1;  // 1-based
    std::size_t offset = 0;  // byte offset into the source text
    std::string message;
    Severity severity = Severity::Error;
};

struct ParseResult {
    std::optional<ModelSpec> spec;
    std::vector<ParseDiagnostic> diagnostics;

    [[nodiscard]] bool ok() const noexcept { return spec.has_value(); }
    /// All diagnostics as "line:col: severity: message" lines.
    [[nodiscard]] std::string message() const;
};

inline constexpr double kDefaultLoadingStart = 0.5;
inline constexpr double kDefaultVarianceStart = 1.0;
inline constexpr double kDefaultCovarianceStart = 0.0;

[[nodiscard]] ParseResult parse_model(const ModelSource& src);

/// Throws std::invalid_argument carrying the diagnostics when parsing fails.
[[nodiscard]] ModelSpec parse_model_or_throw(const ModelSource& src);

/// Text that parses back to an equivalent spec (free labels may be renamed).
[[nodiscard]] std::string format_spec(const ModelSpec& spec);

}  // namespace latent_rank
