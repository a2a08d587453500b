#pragma once

#include "latent_rank/dsl.hpp"
#include "latent_rank/model.hpp"

#include <random>
#include <sstream>
#include <string>

namespace latent_rank::testing {

/// Moments equal to Sigma(theta), each group of size n.
inline SampleMoments population_moments(const ModelSpec& spec, const Theta& theta, double n = 1000.0) {
    SampleMoments m;
    const auto sigma = implied_sigma(spec, theta);
    for (std::size_t g = 0; g < spec.num_groups(); ++g) {
        m.covariances.push_back(unvech(sigma.segment(g), spec.num_observed(g)));
        m.sample_sizes.push_back(n);
    }
    return m;
}

inline Matrix random_spd(Eigen::Index q, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Matrix a(q, q);
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index j = 0; j < q; ++j) a(i, j) = z(rng);
    }
    return a * a.transpose() + static_cast<double>(q) * Matrix::Identity(q, q);
}

inline Matrix random_symmetric(Eigen::Index q, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    Matrix a(q, q);
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index j = 0; j < q; ++j) a(i, j) = z(rng);
    }
    return 0.5 * (a + a.transpose());
}

/// Random multi-group CFA text: 1-3 latents with 2-4 indicators each, occasional
/// cross-loadings, residual covariances and cross-group equality labels.
inline ModelSource random_model(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> groups_d(1, 2);
    std::uniform_int_distribution<int> latents_d(1, 3);
    std::uniform_int_distribution<int> ind_d(2, 4);
    std::bernoulli_distribution coin(0.3);
    const int groups = groups_d(rng);
    const int k = latents_d(rng);
    std::vector<std::vector<std::string>> ind(static_cast<std::size_t>(k));
    int next = 1;
    for (auto& v : ind) {
        const int m = ind_d(rng);
        for (int i = 0; i < m; ++i) v.push_back("x" + std::to_string(next++));
    }
    std::ostringstream os;
    for (int g = 1; g <= groups; ++g) {
        if (groups > 1) os << "group: " << g << "\n";
        for (int f = 0; f < k; ++f) {
            os << "F" << f + 1 << " =~ ";
            for (std::size_t i = 0; i < ind[static_cast<std::size_t>(f)].size(); ++i) {
                const auto& y = ind[static_cast<std::size_t>(f)][i];
                if (i) os << " + ";
                if (i == 0) {
                    os << "1*" << y;
                } else if (groups > 1 && coin(rng)) {
                    os << "eq_" << f << "_" << i << "*" << y;
                } else {
                    os << y;
                }
            }
            if (k > 1 && coin(rng)) {
                const auto& other = ind[static_cast<std::size_t>((f + 1) % k)].back();
                os << " + " << other;
            }
            os << "\n";
        }
        for (int a = 0; a < k; ++a) {
            for (int b = a + 1; b < k; ++b) os << "F" << a + 1 << " ~~ F" << b + 1 << "\n";
        }
        if (coin(rng) && ind[0].size() >= 2) os << ind[0][0] << " ~~ " << ind[0][1] << "\n";
    }
    return {os.str(), static_cast<std::size_t>(groups)};
}

/// Theta with loadings in [0.5, 1.5], variances in [0.5, 1.5] and covariances in [-0.3, 0.3].
inline Theta random_theta(const ModelSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(0.5, 1.5);
    std::uniform_real_distribution<double> cov(-0.3, 0.3);
    Theta t = spec.start_theta();
    std::vector<bool> done(spec.num_free(), false);
    for (std::size_t i = 0; i < spec.entries().size(); ++i) {
        const auto idx = spec.entry_free_index(i);
        if (!idx || done[*idx]) continue;
        const auto& s = spec.entries()[i].slot;
        const bool off_diagonal = s.matrix != MatrixTag::Loading && s.row != s.col;
        t.values()[static_cast<Eigen::Index>(*idx)] = off_diagonal ? cov(rng) : pos(rng);
        done[*idx] = true;
    }
    return t;
}

}  // namespace latent_rank::testing
