#include "latent_rank/identification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace latent_rank {

JacobianReport rank_report(const Matrix& delta, std::optional<double> absolute_tol) {
    if (!delta.allFinite()) throw std::invalid_argument("rank_report requires a finite Jacobian");
    JacobianReport rep;
    rep.jacobian = delta;
    const auto p = delta.cols();
    if (p == 0) {
        rep.nullspace = Matrix(0, 0);
        return rep;
    }
    Eigen::JacobiSVD<Matrix> svd(delta, Eigen::ComputeFullV);
    // JacobiSVD yields min(p*, p) values; pad so every column has one.
    rep.singular_values = Vector::Zero(p);
    rep.singular_values.head(svd.singularValues().size()) = svd.singularValues();
    const double smax = rep.singular_values.size() ? rep.singular_values[0] : 0.0;
    rep.tolerance = absolute_tol.value_or(static_cast<double>(std::max(delta.rows(), p)) * smax *
                                          std::numeric_limits<double>::epsilon());
    rep.rank = 0;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (rep.singular_values[i] > rep.tolerance) ++rep.rank;
    }
    const auto rank = static_cast<Eigen::Index>(rep.rank);
    rep.nullspace = svd.matrixV().rightCols(p - rank);
    return rep;
}

JacobianReport rank_report(const ModelSpec& spec, const Theta& theta, std::optional<double> absolute_tol) {
    auto rep = rank_report(analytic_jacobian(spec, theta), absolute_tol);
    rep.row_labels = spec.moment_labels();
    rep.col_labels = spec.free_labels();
    return rep;
}

AffectedSet affected_params(const JacobianReport& report, double threshold) {
    AffectedSet out;
    const auto p = report.jacobian.cols();
    std::vector<std::string> labels = report.col_labels;
    if (labels.size() != static_cast<std::size_t>(p)) {
        labels.clear();
        for (Eigen::Index j = 0; j < p; ++j) labels.push_back("theta" + std::to_string(j + 1));
    }
    Matrix basis = report.nullspace;
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
        const double norm = basis.col(k).norm();
        if (norm > 0.0) basis.col(k) /= norm;
    }
    for (Eigen::Index j = 0; j < p; ++j) {
        const double comp = basis.cols() ? basis.row(j).cwiseAbs().maxCoeff() : 0.0;
        const auto& label = labels[static_cast<std::size_t>(j)];
        out.components.emplace_back(label, comp);
        (comp < threshold ? out.orthogonal : out.affected).push_back(label);
    }
    return out;
}

InformationReport fisher_information(const Matrix& delta, const WeightMatrix& v,
                                     const std::vector<double>& group_weights, double total_n,
                                     double singularity_threshold) {
    if (v.blocks.size() != group_weights.size()) {
        throw std::invalid_argument("fisher_information: one group weight per weight block required");
    }
    if (!(total_n > 0.0)) throw std::invalid_argument("fisher_information: total n must be positive");
    v.check();
    const auto p = delta.cols();
    InformationReport rep;
    rep.information = Matrix::Zero(p, p);
    Eigen::Index off = 0;
    for (std::size_t g = 0; g < v.blocks.size(); ++g) {
        const auto len = v.blocks[g].rows();
        if (off + len > delta.rows()) throw std::invalid_argument("fisher_information: weight blocks exceed p*");
        const auto d_g = delta.middleRows(off, len);
        rep.information.noalias() += group_weights[g] * d_g.transpose() * v.blocks[g] * d_g;
        off += len;
    }
    if (off != delta.rows()) throw std::invalid_argument("fisher_information: weight blocks do not cover p*");
    rep.information = 0.5 * (rep.information + rep.information.transpose());

    rep.standard_errors.assign(static_cast<std::size_t>(p), std::nullopt);
    if (p == 0) {
        rep.condition_number = 1.0;
        rep.singular = false;
        return rep;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(rep.information);
    const double lo = eig.eigenvalues()[0];
    const double hi = eig.eigenvalues()[p - 1];
    rep.condition_number = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    rep.singular = !(rep.condition_number < singularity_threshold);
    if (!rep.singular) {
        const Matrix inv = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
                           eig.eigenvectors().transpose();
        rep.asymptotic_variance = inv / total_n;
        for (Eigen::Index j = 0; j < p; ++j) {
            rep.standard_errors[static_cast<std::size_t>(j)] = std::sqrt((*rep.asymptotic_variance)(j, j));
        }
    }
    return rep;
}

PatternCheck nullspace_pattern_check(const ModelSpec& spec, const Theta& theta, const PodRoles& roles,
                                     double tol) {
    PatternCheck out;
    const auto rep = rank_report(spec, theta);
    out.deficiency = rep.deficiency();
    if (out.deficiency == 0) {
        out.detail = "Jacobian has full column rank " + std::to_string(rep.rank) + "; no deficiency to check";
        return out;
    }
    out.applicable = true;
    if (out.deficiency != 1) {
        out.detail = "expected a 1-dimensional nullspace, found " + std::to_string(out.deficiency);
        return out;
    }

    double lambda_sum = 0.0;
    double rho_sum = 0.0;
    int n_lambda = 0;
    int n_rho = 0;
    std::optional<std::size_t> anchor;
    for (std::size_t j = 0; j < spec.num_free(); ++j) {
        const auto& label = spec.free_labels()[j];
        auto it = roles.find(label);
        if (it == roles.end()) {
            out.detail = "no role assigned to parameter '" + label + "'";
            return out;
        }
        const double value = theta.values()[static_cast<Eigen::Index>(j)];
        switch (it->second) {
            case PodRole::LoadingMethod1:
            case PodRole::LoadingOther:
                lambda_sum += value;
                ++n_lambda;
                break;
            case PodRole::TraitCorrelation:
                rho_sum += value;
                ++n_rho;
                break;
            case PodRole::MethodVariance1: anchor = j; break;
            default: break;
        }
    }
    if (n_lambda == 0 || n_rho == 0 || !anchor) {
        out.detail = "roles must include loadings, trait correlations and the method-1 variance";
        return out;
    }
    out.lambda = lambda_sum / n_lambda;
    out.rho = rho_sum / n_rho;

    Vector n = rep.nullspace.col(0);
    const double a = n[static_cast<Eigen::Index>(*anchor)];
    if (std::abs(a) < tol) {
        out.detail = "nullspace has no method-1 variance component; cannot normalize";
        return out;
    }
    n *= -1.0 / a;

    const double lam_c = 1.0 / (2.0 * out.lambda * out.rho);
    const double psi_c = (out.rho - 1.0) / out.rho;
    out.passed = true;
    for (std::size_t j = 0; j < spec.num_free(); ++j) {
        const auto& label = spec.free_labels()[j];
        double expected = 0.0;
        switch (roles.at(label)) {
            case PodRole::LoadingMethod1: expected = lam_c; break;
            case PodRole::LoadingOther: expected = -lam_c; break;
            case PodRole::ResidualMethod1: expected = psi_c; break;
            case PodRole::ResidualOther: expected = -psi_c; break;
            case PodRole::TraitCorrelation: expected = 0.0; break;
            case PodRole::MethodVariance1: expected = -1.0; break;
            case PodRole::MethodVarianceOther: expected = 1.0; break;
        }
        const double observed = n[static_cast<Eigen::Index>(j)];
        out.components.push_back({label, expected, observed});
        if (!(std::abs(observed - expected) < tol)) out.passed = false;
    }
    std::ostringstream os;
    os << (out.passed ? "nullspace matches" : "nullspace differs from") << " the equal-loading pattern at lambda="
       << out.lambda << ", rho=" << out.rho;
    out.detail = os.str();
    return out;
}

std::vector<RankScanRow> rank_scan(const ModelSpec& spec, const ThetaFamily& family,
                                   const std::vector<double>& grid, std::optional<double> absolute_tol) {
    std::vector<RankScanRow> rows;
    rows.reserve(grid.size());
    for (double d : grid) {
        const auto rep = rank_report(spec, family(d), absolute_tol);
        RankScanRow row;
        row.delta = d;
        row.num_params = spec.num_free();
        row.rank = rep.rank;
        const auto& sv = rep.singular_values;
        row.smallest_singular_value = sv.size() ? sv[sv.size() - 1] : 0.0;
        row.condition_number = row.smallest_singular_value > 0.0 ? sv[0] / row.smallest_singular_value
                                                                 : std::numeric_limits<double>::infinity();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace latent_rank
