#include "latent_rank/estimation.hpp"

#include "latent_rank/jacobian.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace latent_rank {

namespace {

constexpr double kAdmissibilityTol = -1e-10;

struct Evaluation {
    double loss = 0.0;
    Vector gradient;
    Matrix information;  // sum_g w_g Delta_g' V_g Delta_g
    Vector weighted_residual;  // stacked w_g V_g r_g
};

void check_dimensions(const ModelSpec& spec, const MomentVector& s, const WeightMatrix& v,
                      const std::vector<double>& w) {
    if (static_cast<std::size_t>(s.values().size()) != spec.num_moments() ||
        s.num_groups() != spec.num_groups()) {
        throw std::invalid_argument("moment vector does not match the model's p*");
    }
    if (v.blocks.size() != spec.num_groups() || w.size() != spec.num_groups()) {
        throw std::invalid_argument("weight blocks / group weights do not match the model's group count");
    }
    for (std::size_t g = 0; g < v.blocks.size(); ++g) {
        const auto len = static_cast<Eigen::Index>(s.segment_size(g));
        if (v.blocks[g].rows() != len || v.blocks[g].cols() != len) {
            throw std::invalid_argument("weight block " + std::to_string(g + 1) + " has the wrong size");
        }
    }
}

double loss_only(const ModelSpec& spec, const Theta& theta, const MomentVector& s, const WeightMatrix& v,
                 const std::vector<double>& w) {
    const Vector r = s.values() - implied_sigma(spec, theta).values();
    double f = 0.0;
    for (std::size_t g = 0; g < v.blocks.size(); ++g) {
        const auto seg = r.segment(static_cast<Eigen::Index>(s.offset(g)),
                                   static_cast<Eigen::Index>(s.segment_size(g)));
        f += w[g] * seg.dot(v.blocks[g] * seg);
    }
    return f;
}

Evaluation evaluate(const ModelSpec& spec, const Theta& theta, const MomentVector& s, const WeightMatrix& v,
                    const std::vector<double>& w, bool with_information = true) {
    const Vector r = s.values() - implied_sigma(spec, theta).values();
    const Matrix delta = analytic_jacobian(spec, theta);
    const auto p = delta.cols();
    Evaluation ev;
    ev.gradient = Vector::Zero(p);
    if (with_information) ev.information = Matrix::Zero(p, p);
    ev.weighted_residual = Vector::Zero(r.size());
    for (std::size_t g = 0; g < v.blocks.size(); ++g) {
        const auto off = static_cast<Eigen::Index>(s.offset(g));
        const auto len = static_cast<Eigen::Index>(s.segment_size(g));
        const auto r_g = r.segment(off, len);
        const auto d_g = delta.middleRows(off, len);
        const Vector vr = v.blocks[g] * r_g;
        ev.loss += w[g] * r_g.dot(vr);
        ev.gradient.noalias() -= 2.0 * w[g] * d_g.transpose() * vr;
        if (with_information) ev.information.noalias() += w[g] * d_g.transpose() * v.blocks[g] * d_g;
        ev.weighted_residual.segment(off, len) = w[g] * vr;
    }
    return ev;
}

struct InfoSpectrum {
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    double condition = 1.0;
};

InfoSpectrum spectrum(const Matrix& info) {
    InfoSpectrum out;
    if (info.size() == 0) return out;
    out.eig.compute(info);
    const double lo = out.eig.eigenvalues()[0];
    const double hi = out.eig.eigenvalues()[out.eig.eigenvalues().size() - 1];
    out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    return out;
}

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

std::vector<Matrix> implied_covariances(const ModelSpec& spec, const Theta& theta) {
    std::vector<Matrix> out;
    for (const auto& m : build_matrices(spec, theta)) out.push_back(m.implied());
    return out;
}

}  // namespace

const char* to_string(Optimizer o) {
    switch (o) {
        case Optimizer::GradientDescent: return "GRADIENT_DESCENT";
        case Optimizer::FisherScoring: return "FISHER_SCORING";
        case Optimizer::NewtonRaphson: return "NEWTON_RAPHSON";
    }
    return "?";
}

const char* to_string(WeightPolicy w) {
    return w == WeightPolicy::Sample ? "SAMPLE" : "ITERATIVE";
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::GradientTol: return "GRADIENT_TOL";
        case StopReason::MaxIter: return "MAX_ITER";
        case StopReason::SingularInformation: return "SINGULAR_INFORMATION";
        case StopReason::LineFailure: return "LINE_FAILURE";
    }
    return "?";
}

void FitConfig::check() const {
    if (!(gradient_tol > 0.0)) throw std::invalid_argument("gradient tolerance must be positive");
    if (!(singularity_threshold > 0.0)) throw std::invalid_argument("singularity threshold must be positive");
    if (max_iter < 1) throw std::invalid_argument("max iterations must be >= 1");
    if (max_halvings < 0) throw std::invalid_argument("max halvings must be >= 0");
    if (optimizer == Optimizer::GradientDescent && !(learning_rate > 0.0)) {
        throw std::invalid_argument("learning rate must be positive");
    }
}

Matrix WeightMatrix::dense() const {
    Eigen::Index n = 0;
    for (const auto& b : blocks) n += b.rows();
    Matrix out = Matrix::Zero(n, n);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        out.block(at, at, b.rows(), b.cols()) = b;
        at += b.rows();
    }
    return out;
}

void WeightMatrix::check() const {
    for (std::size_t g = 0; g < blocks.size(); ++g) {
        const auto& b = blocks[g];
        if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
            throw std::invalid_argument("weight block " + std::to_string(g + 1) + " is not symmetric");
        }
        Eigen::LLT<Matrix> llt(b);
        if (llt.info() != Eigen::Success) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(b, Eigen::EigenvaluesOnly);
            throw NotPositiveDefinite("weight block " + std::to_string(g + 1) + " is not positive-definite",
                                      eig.eigenvalues()[0]);
        }
    }
}

double wls_loss(const ModelSpec& spec, const Theta& theta, const MomentVector& s, const WeightMatrix& v,
                const std::vector<double>& group_weights) {
    check_dimensions(spec, s, v, group_weights);
    return loss_only(spec, theta, s, v, group_weights);
}

Vector gradient(const ModelSpec& spec, const Theta& theta, const MomentVector& s, const WeightMatrix& v,
                const std::vector<double>& group_weights) {
    check_dimensions(spec, s, v, group_weights);
    return evaluate(spec, theta, s, v, group_weights).gradient;
}

Matrix hessian(const ModelSpec& spec, const Theta& theta, const MomentVector& s, const WeightMatrix& v,
               const std::vector<double>& group_weights) {
    check_dimensions(spec, s, v, group_weights);
    const auto ev = evaluate(spec, theta, s, v, group_weights);
    return 2.0 * ev.information - 2.0 * second_derivative_contraction(spec, theta, ev.weighted_residual);
}

Matrix ml_weight(const Matrix& sigma_hat) {
    if (sigma_hat.rows() != sigma_hat.cols() || sigma_hat.rows() == 0) {
        throw std::invalid_argument("ml_weight requires a non-empty square matrix");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_hat, Eigen::EigenvaluesOnly);
    const double smallest = eig.eigenvalues()[0];
    if (!(smallest > 0.0)) {
        std::ostringstream os;
        os << "covariance matrix is not positive-definite (smallest eigenvalue " << smallest << ")";
        throw NotPositiveDefinite(os.str(), smallest);
    }
    const Matrix inv = sigma_hat.llt().solve(Matrix::Identity(sigma_hat.rows(), sigma_hat.cols()));
    const Eigen::Index q = inv.rows();
    Matrix kron(q * q, q * q);
    for (Eigen::Index i1 = 0; i1 < q; ++i1) {
        for (Eigen::Index j1 = 0; j1 < q; ++j1) {
            kron.block(i1 * q, j1 * q, q, q) = inv(i1, j1) * inv;
        }
    }
    const Matrix d = duplication_matrix(static_cast<std::size_t>(q));
    Matrix v = 0.5 * d.transpose() * kron * d;
    return 0.5 * (v + v.transpose());
}

WeightMatrix ml_weights(const std::vector<Matrix>& sigma_hats) {
    WeightMatrix v;
    v.blocks.reserve(sigma_hats.size());
    for (const auto& s : sigma_hats) v.blocks.push_back(ml_weight(s));
    return v;
}

Admissibility check_admissibility(const ModelSpec& spec, const Theta& theta) {
    Admissibility out;
    const auto mats = build_matrices(spec, theta);
    auto check_matrix = [&](std::size_t g, const Matrix& m, MatrixTag tag, const char* name) {
        if (m.size() == 0) return;
        const auto before = out.offending.size();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (m(i, i) < kAdmissibilityTol) {
                std::ostringstream os;
                os << spec.describe(Slot{g, tag, static_cast<std::size_t>(i), static_cast<std::size_t>(i)})
                   << " = " << m(i, i) << " is negative";
                out.offending.push_back(os.str());
            }
        }
        if (out.offending.size() > before) return;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
        const double smallest = eig.eigenvalues()[0];
        if (smallest < kAdmissibilityTol) {
            std::ostringstream os;
            os << "g" << g + 1 << ' ' << name << " is not positive-semidefinite (smallest eigenvalue "
               << smallest << ")";
            out.offending.push_back(os.str());
        }
    };
    for (std::size_t g = 0; g < mats.size(); ++g) {
        check_matrix(g, mats[g].factor_cov, MatrixTag::FactorCov, "Phi");
        check_matrix(g, mats[g].residual_cov, MatrixTag::ResidualCov, "Psi");
    }
    out.admissible = out.offending.empty();
    return out;
}

FitResult fit(const ModelSpec& spec, const SampleMoments& moments, const FitConfig& config) {
    return fit(spec, moments, config, spec.start_theta());
}

FitResult fit(const ModelSpec& spec, const SampleMoments& moments, const FitConfig& config,
              const Theta& start) {
    config.check();
    moments.check(spec);
    start.check_conforms(spec);

    const MomentVector s = moments.moments();
    const auto w = moments.group_weights();
    WeightMatrix v = ml_weights(moments.covariances);

    FitResult res;
    Theta theta = start;
    bool warned_hessian = false;

    auto refresh_weights = [&](const Theta& at, int iteration) {
        if (config.weights != WeightPolicy::Iterative) return;
        try {
            v = ml_weights(implied_covariances(spec, at));
        } catch (const NotPositiveDefinite& e) {
            res.warnings.push_back("iteration " + std::to_string(iteration) +
                                   ": implied covariance not positive-definite; kept previous weights (" +
                                   e.what() + ")");
        }
    };
    refresh_weights(theta, 0);

    Evaluation ev;
    for (int iter = 0;; ++iter) {
        const bool gd = config.optimizer == Optimizer::GradientDescent;
        ev = evaluate(spec, theta, s, v, w, !gd);
        res.iterations = iter;
        if (!std::isfinite(ev.loss)) {
            res.stop_reason = StopReason::LineFailure;
            break;
        }
        std::optional<InfoSpectrum> spec_info;
        auto info_spectrum = [&]() -> const InfoSpectrum& {
            if (!spec_info) {
                if (ev.information.size() == 0 && ev.gradient.size() > 0) {
                    ev = evaluate(spec, theta, s, v, w, true);
                }
                spec_info = spectrum(ev.information);
            }
            return *spec_info;
        };
        if (max_abs(ev.gradient) / std::max(1.0, ev.loss) < config.gradient_tol) {
            res.stop_reason = info_spectrum().condition >= config.singularity_threshold
                                  ? StopReason::SingularInformation
                                  : StopReason::GradientTol;
            break;
        }
        if (iter >= config.max_iter) {
            res.stop_reason = StopReason::MaxIter;
            break;
        }

        Vector step;
        // Eigenvalues below lambda_max / threshold are clamped, so steps stay finite
        // while the information is (near) singular.
        auto fisher_step = [&] {
            if (ev.gradient.size() == 0) return Vector(ev.gradient);
            const auto& eig = info_spectrum().eig;
            const double floor = std::max(eig.eigenvalues().maxCoeff(), 0.0) / config.singularity_threshold;
            const Vector inv = eig.eigenvalues().cwiseMax(floor).cwiseMax(std::numeric_limits<double>::min()).cwiseInverse();
            return Vector(-0.5 * (eig.eigenvectors() * (inv.asDiagonal() * (eig.eigenvectors().transpose() * ev.gradient))));
        };
        switch (config.optimizer) {
            case Optimizer::GradientDescent:
                step = -config.learning_rate * ev.gradient;
                break;
            case Optimizer::FisherScoring:
                step = fisher_step();
                break;
            case Optimizer::NewtonRaphson: {
                const Matrix h = 2.0 * ev.information -
                                 2.0 * second_derivative_contraction(spec, theta, ev.weighted_residual);
                Eigen::LLT<Matrix> llt(h);
                if (llt.info() == Eigen::Success) {
                    step = -llt.solve(ev.gradient);
                } else {
                    if (!warned_hessian) {
                        res.warnings.push_back("iteration " + std::to_string(iter) +
                                               ": observed Hessian not positive-definite; "
                                               "using Fisher scoring steps where needed");
                        warned_hessian = true;
                    }
                    step = fisher_step();
                }
                break;
            }
        }

        bool accepted = false;
        Theta candidate = theta;
        for (int h = 0; h <= config.max_halvings; ++h) {
            candidate.values() = theta.values() + step;
            const double f = loss_only(spec, candidate, s, v, w);
            if (std::isfinite(f) && f <= ev.loss) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            res.stop_reason = StopReason::LineFailure;
            break;
        }
        theta = std::move(candidate);
        refresh_weights(theta, iter + 1);
    }

    res.theta_hat = theta;
    res.loss = ev.loss;
    res.gradient_norm = max_abs(ev.gradient);
    res.converged = res.stop_reason == StopReason::GradientTol;
    const auto adm = check_admissibility(spec, theta);
    res.admissible = adm.admissible;
    res.inadmissible_slots = adm.offending;
    return res;
}

}  // namespace latent_rank
