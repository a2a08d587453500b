#pragma once

// Weighted least-squares / normal-theory ML fitting of multi-group factor models.

#include "latent_rank/model.hpp"

#include <string>
#include <vector>

namespace latent_rank {

/// Block-diagonal p* x p* weight matrix, one symmetric positive-definite block per group.
struct WeightMatrix {
    std::vector<Matrix> blocks;

    [[nodiscard]] Matrix dense() const;
    /// Throws NotPositiveDefinite if any block fails a Cholesky factorization.
    void check() const;
};

enum class Optimizer { GradientDescent, FisherScoring, NewtonRaphson };
enum class WeightPolicy { Sample, Iterative };
enum class StopReason { GradientTol, MaxIter, SingularInformation, LineFailure };

[[nodiscard]] const char* to_string(Optimizer o);
[[nodiscard]] const char* to_string(WeightPolicy w);
[[nodiscard]] const char* to_string(StopReason r);

struct FitConfig {
    Optimizer optimizer = Optimizer::FisherScoring;
    /// Scalar step for gradient descent only.
    double learning_rate = 0.1;
    /// Converged when max|g| / max(1, F) falls below this.
    double gradient_tol = 1e-8;
    int max_iter = 500;
    WeightPolicy weights = WeightPolicy::Sample;
    /// A stationary point where cond(Delta' V Delta) reaches this stops with SINGULAR_INFORMATION;
    /// before that, Fisher steps clamp the information spectrum at this condition number.
    double singularity_threshold = 1e12;
    int max_halvings = 20;

    /// Throws std::invalid_argument for non-positive tolerances or max_iter < 1.
    void check() const;
};

struct Admissibility {
    bool admissible = true;
    std::vector<std::string> offending;
};

struct FitResult {
    Theta theta_hat;
    bool converged = false;
    StopReason stop_reason = StopReason::MaxIter;
    double loss = 0.0;
    int iterations = 0;
    /// max-abs gradient at theta_hat
    double gradient_norm = 0.0;
    bool admissible = false;
    std::vector<std::string> inadmissible_slots;
    std::vector<std::string> warnings;
};

/// F = sum_g w_g (s_g - sigma_g)' V_g (s_g - sigma_g)
[[nodiscard]] double wls_loss(const ModelSpec& spec, const Theta& theta, const MomentVector& s,
                              const WeightMatrix& v, const std::vector<double>& group_weights);

/// g = dF/dtheta = -2 sum_g w_g Delta_g' V_g (s_g - sigma_g). Descent direction is -g.
[[nodiscard]] Vector gradient(const ModelSpec& spec, const Theta& theta, const MomentVector& s,
                              const WeightMatrix& v, const std::vector<double>& group_weights);

/// Observed Hessian of F at fixed V.
[[nodiscard]] Matrix hessian(const ModelSpec& spec, const Theta& theta, const MomentVector& s,
                             const WeightMatrix& v, const std::vector<double>& group_weights);

/// V = 1/2 D' (S^-1 kron S^-1) D. Throws NotPositiveDefinite naming the smallest eigenvalue.
[[nodiscard]] Matrix ml_weight(const Matrix& sigma_hat);
[[nodiscard]] WeightMatrix ml_weights(const std::vector<Matrix>& sigma_hats);

/// PSD check (eigenvalues >= -1e-10, diagonal >= -1e-10) on every Phi_g and Psi_g.
[[nodiscard]] Admissibility check_admissibility(const ModelSpec& spec, const Theta& theta);

/// Minimizes F from the model's start values; theta_{t+1} = theta_t - A_t g(theta_t) with
/// step halving whenever F would increase.
[[nodiscard]] FitResult fit(const ModelSpec& spec, const SampleMoments& moments, const FitConfig& config);
/// Same, starting from `start` instead of the model's start values.
[[nodiscard]] FitResult fit(const ModelSpec& spec, const SampleMoments& moments, const FitConfig& config,
                            const Theta& start);

}  // namespace latent_rank
