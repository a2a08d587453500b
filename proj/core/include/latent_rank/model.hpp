#pragma once

// Multi-group factor models as a parameter table over (Lambda_g, Phi_g, Psi_g),
// implied moments, and the vech / duplication machinery.

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latent_rank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class MatrixTag { Loading, FactorCov, ResidualCov };
enum class ParamStatus { Free, Fixed };

[[nodiscard]] const char* to_string(MatrixTag tag);

/// Cell of one model matrix. Rows/cols are zero-based; `group` is zero-based.
struct Slot {
    std::size_t group = 0;
    MatrixTag matrix = MatrixTag::Loading;
    std::size_t row = 0;
    std::size_t col = 0;

    auto operator<=>(const Slot&) const = default;
};

/// `value` is the fixed value for FIXED entries and the start value for FREE ones.
struct ParameterEntry {
    std::string label;
    Slot slot;
    ParamStatus status = ParamStatus::Free;
    double value = 0.0;
};

struct GroupLayout {
    std::vector<std::string> observed;
    std::vector<std::string> latent;
};

/// Thrown when an input that must be positive-definite is not.
class NotPositiveDefinite : public std::runtime_error {
public:
    NotPositiveDefinite(const std::string& what, double smallest_eigenvalue)
        : std::runtime_error(what), smallest_eigenvalue_(smallest_eigenvalue) {}
    [[nodiscard]] double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

private:
    double smallest_eigenvalue_;
};

class Theta;

/// Immutable model description. Cells without an entry are FIXED at 0.
///
/// The free-parameter order defines the layout of Theta; by default it is the
/// order in which FREE labels first appear in `entries`.
class ModelSpec {
public:
    ModelSpec() = default;
    ModelSpec(std::vector<GroupLayout> groups, std::vector<ParameterEntry> entries);
    ModelSpec(std::vector<GroupLayout> groups, std::vector<ParameterEntry> entries,
              std::vector<std::string> free_order);

    [[nodiscard]] const std::vector<GroupLayout>& groups() const noexcept { return groups_; }
    [[nodiscard]] const std::vector<ParameterEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const std::vector<std::string>& free_labels() const noexcept { return free_labels_; }

    [[nodiscard]] std::size_t num_groups() const noexcept { return groups_.size(); }
    /// p
    [[nodiscard]] std::size_t num_free() const noexcept { return free_labels_.size(); }
    /// p*
    [[nodiscard]] std::size_t num_moments() const noexcept;
    [[nodiscard]] std::size_t moment_offset(std::size_t group) const;
    [[nodiscard]] std::size_t num_observed(std::size_t group) const { return groups_.at(group).observed.size(); }
    [[nodiscard]] std::size_t num_latent(std::size_t group) const { return groups_.at(group).latent.size(); }

    [[nodiscard]] std::optional<std::size_t> free_index(const std::string& label) const;
    /// Index into Theta for entry `i`, or nullopt for FIXED entries.
    [[nodiscard]] std::optional<std::size_t> entry_free_index(std::size_t i) const;

    /// Start values of the free parameters, in free order.
    [[nodiscard]] Theta start_theta() const;

    /// Same model with a different Theta layout. `order` must be a permutation of free_labels().
    [[nodiscard]] ModelSpec with_free_order(std::vector<std::string> order) const;
    /// Same model with start values replaced by `theta`.
    [[nodiscard]] ModelSpec with_start(const Theta& theta) const;

    /// Row labels for the stacked moment vector, e.g. "g1:y11~~y12".
    [[nodiscard]] std::vector<std::string> moment_labels() const;
    /// Human-readable name of a slot, e.g. "g1 psi[y12,y12]".
    [[nodiscard]] std::string describe(const Slot& slot) const;

private:
    void index_entries();

    std::vector<GroupLayout> groups_;
    std::vector<ParameterEntry> entries_;
    std::vector<std::string> free_labels_;
    std::vector<std::ptrdiff_t> entry_index_;
};

/// Free-parameter vector with its label layout.
class Theta {
public:
    Theta() = default;
    Theta(Vector values, std::vector<std::string> labels);
    Theta(const ModelSpec& spec, Vector values);

    [[nodiscard]] const Vector& values() const noexcept { return values_; }
    [[nodiscard]] Vector& values() noexcept { return values_; }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }

    [[nodiscard]] double at(const std::string& label) const;
    void set(const std::string& label, double value);

    /// Throws std::invalid_argument unless size and label order match `spec`.
    void check_conforms(const ModelSpec& spec) const;

private:
    Vector values_;
    std::vector<std::string> labels_;
};

/// Stacked per-group vech segments; total length p*.
class MomentVector {
public:
    MomentVector() = default;
    MomentVector(Vector values, std::vector<std::size_t> group_sizes);

    [[nodiscard]] const Vector& values() const noexcept { return values_; }
    [[nodiscard]] std::size_t num_groups() const noexcept { return sizes_.size(); }
    [[nodiscard]] std::size_t offset(std::size_t group) const { return offsets_.at(group); }
    [[nodiscard]] std::size_t segment_size(std::size_t group) const { return sizes_.at(group); }
    [[nodiscard]] Eigen::VectorBlock<const Vector> segment(std::size_t group) const {
        return values_.segment(static_cast<Eigen::Index>(offsets_.at(group)),
                               static_cast<Eigen::Index>(sizes_.at(group)));
    }

private:
    Vector values_;
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
};

/// Per-group covariance matrices S_g with sample sizes n_g.
struct SampleMoments {
    std::vector<Matrix> covariances;
    std::vector<double> sample_sizes;

    [[nodiscard]] MomentVector moments() const;
    /// w_g = n_g / sum(n)
    [[nodiscard]] std::vector<double> group_weights() const;
    [[nodiscard]] double total_n() const;
    /// Throws std::invalid_argument on shape mismatch with `spec`, NotPositiveDefinite otherwise.
    void check(const ModelSpec& spec) const;
};

struct GroupMatrices {
    Matrix loadings;      // q x q*
    Matrix factor_cov;    // q* x q*
    Matrix residual_cov;  // q x q

    [[nodiscard]] Matrix implied() const {
        return loadings * factor_cov * loadings.transpose() + residual_cov;
    }
};

[[nodiscard]] std::vector<GroupMatrices> build_matrices(const ModelSpec& spec, const Theta& theta);
[[nodiscard]] MomentVector implied_sigma(const ModelSpec& spec, const Theta& theta);

/// Column-major lower triangle. Throws std::invalid_argument for asymmetric input (tol 1e-10).
[[nodiscard]] Vector vech(const Matrix& m);
/// Lower-triangle stacking with no symmetry check.
[[nodiscard]] Vector vech_lower(const Matrix& m);
[[nodiscard]] Matrix unvech(const Vector& v, std::size_t q);
[[nodiscard]] Matrix duplication_matrix(std::size_t q);
[[nodiscard]] constexpr std::size_t vech_size(std::size_t q) noexcept { return q * (q + 1) / 2; }

enum class ViolationKind { Dimension, Symmetry, SharedLabel, DuplicateSlot, Group };

struct Violation {
    ViolationKind kind;
    std::optional<Slot> slot;
    std::string message;
};

/// Empty iff every ParameterEntry / ModelSpec invariant holds.
[[nodiscard]] std::vector<Violation> validate(const ModelSpec& spec);

/// Same layouts, same slots/status/values, free labels equal up to renaming.
/// Explicit FIXED-zero entries are treated as absent.
[[nodiscard]] bool equivalent(const ModelSpec& a, const ModelSpec& b);

}  // namespace latent_rank
