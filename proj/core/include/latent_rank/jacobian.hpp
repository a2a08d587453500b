#pragma once

#include "latent_rank/model.hpp"

#include <vector>

namespace latent_rank {

/// Delta = d sigma / d theta, p* x p, rows in MomentVector order, columns in free order.
///
/// Per slot the differential is
///   loading (i,j):     e_i (Lambda Phi)[:,j]^T + (Lambda Phi)[:,j] e_i^T
///   factor cov (r,c):  Lambda[:,r] Lambda[:,c]^T
///   residual cov (r,c): E_rc
/// and a column sums the differentials of every slot carrying its label.
[[nodiscard]] Matrix analytic_jacobian(const ModelSpec& spec, const Theta& theta);

/// Central differences of implied_sigma with step h.
[[nodiscard]] Matrix numeric_jacobian(const ModelSpec& spec, const Theta& theta, double h = 1e-6);

/// sum_k u_k * d^2 sigma_k / d theta d theta^T, where `weights` is stacked like
/// a MomentVector. Used for the observed Hessian of the fit function.
[[nodiscard]] Matrix second_derivative_contraction(const ModelSpec& spec, const Theta& theta,
                                                   const Vector& weights);

}  // namespace latent_rank
