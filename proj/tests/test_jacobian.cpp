#include "latent_rank/jacobian.hpp"
#include "latent_rank/presets.hpp"

#include "oracles/sbmtmm_table.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace latent_rank {
namespace {

TEST(Jacobian, TableColumnsMatchPresetFreeOrder) {
    const auto spec = preset("sbmtmm");
    ASSERT_EQ(spec.num_free(), oracle::kTableCols);
    ASSERT_EQ(spec.num_moments(), oracle::kTableRows);
    for (std::size_t j = 0; j < oracle::kTableCols; ++j) EXPECT_EQ(spec.free_labels()[j], oracle::kTableColumns[j]);
}

TEST(Jacobian, MatchesPublishedTableAtRandomPoints) {
    const auto spec = preset("sbmtmm");
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
        Vector v(24);
        for (Eigen::Index j = 0; j < 24; ++j) v[j] = u(rng);
        const Theta t(spec, v);
        Vector sigma(42);
        Eigen::Matrix<double, 42, 24, Eigen::RowMajor> table;
        oracle::sbmtmm_table(v.data(), sigma.data(), table.data());
        EXPECT_LT((analytic_jacobian(spec, t) - table).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((implied_sigma(spec, t).values() - sigma).cwiseAbs().maxCoeff(), 1e-12);
    }
}

double max_rel_error(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

TEST(Jacobian, AgreesWithCentralDifferencesOnRandomModels) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 30; ++rep) {
        const auto spec = parse_model_or_throw(testing::random_model(rng));
        const auto t = testing::random_theta(spec, rng);
        EXPECT_LT(max_rel_error(analytic_jacobian(spec, t), numeric_jacobian(spec, t)), 1e-8);
    }
}

TEST(Jacobian, ShapiroSquaredParameterization) {
    const auto spec = preset("shapiro");
    const auto t = shapiro_population_theta(spec);
    const Matrix d = analytic_jacobian(spec, t);
    ASSERT_EQ(d.rows(), 6);
    ASSERT_EQ(d.cols(), 6);
    // sigma_33 = l3^2 + psi3^2: d/dpsi3 = 2 psi3 = 0 at the population point
    EXPECT_EQ(d.col(5).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT(max_rel_error(d, numeric_jacobian(spec, t)), 1e-8);
}

TEST(Jacobian, SecondDerivativeContractionMatchesDifferencedJacobian) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 10; ++rep) {
        const auto spec = parse_model_or_throw(testing::random_model(rng));
        const auto t = testing::random_theta(spec, rng);
        Vector u(static_cast<Eigen::Index>(spec.num_moments()));
        for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = z(rng);
        const Matrix h = second_derivative_contraction(spec, t, u);
        const auto p = static_cast<Eigen::Index>(spec.num_free());
        Matrix fd(p, p);
        const double step = 1e-6;
        for (Eigen::Index j = 0; j < p; ++j) {
            Theta up = t;
            Theta dn = t;
            up.values()[j] += step;
            dn.values()[j] -= step;
            fd.col(j) = (analytic_jacobian(spec, up).transpose() * u - analytic_jacobian(spec, dn).transpose() * u) /
                        (2 * step);
        }
        EXPECT_LT(max_rel_error(h, fd), 1e-7);
        EXPECT_LT((h - h.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
    const auto spec = preset("shapiro");
    EXPECT_THROW((void)second_derivative_contraction(spec, spec.start_theta(), Vector::Zero(3)),
                 std::invalid_argument);
}

}  // namespace
}  // namespace latent_rank
