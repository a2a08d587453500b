#include "latent_rank/jacobian.hpp"

namespace latent_rank {

namespace {

// Position of (r, c), r >= c, inside vech of a q x q matrix.
inline Eigen::Index vech_pos(Eigen::Index r, Eigen::Index c, Eigen::Index q) {
    return c * q - c * (c - 1) / 2 + (r - c);
}

struct FreeEntry {
    const ParameterEntry* entry;
    Eigen::Index column;
};

std::vector<std::vector<FreeEntry>> free_entries_by_group(const ModelSpec& spec) {
    std::vector<std::vector<FreeEntry>> out(spec.num_groups());
    const auto& entries = spec.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (auto idx = spec.entry_free_index(i)) {
            out.at(entries[i].slot.group).push_back({&entries[i], static_cast<Eigen::Index>(*idx)});
        }
    }
    return out;
}

}  // namespace

Matrix analytic_jacobian(const ModelSpec& spec, const Theta& theta) {
    const auto mats = build_matrices(spec, theta);
    const auto by_group = free_entries_by_group(spec);
    Matrix delta = Matrix::Zero(static_cast<Eigen::Index>(spec.num_moments()),
                                static_cast<Eigen::Index>(spec.num_free()));

    Eigen::Index offset = 0;
    for (std::size_t g = 0; g < mats.size(); ++g) {
        const auto& lam = mats[g].loadings;
        const Matrix lam_phi = lam * mats[g].factor_cov;
        const Eigen::Index q = lam.rows();

        for (const auto& fe : by_group[g]) {
            const auto& s = fe.entry->slot;
            const auto r = static_cast<Eigen::Index>(s.row);
            const auto c = static_cast<Eigen::Index>(s.col);
            auto col = delta.col(fe.column);
            switch (s.matrix) {
                case MatrixTag::Loading: {
                    // d Sigma = e_r m^T + m e_r^T with m = (Lambda Phi)[:, c]
                    for (Eigen::Index b = 0; b <= r; ++b) {
                        col[offset + vech_pos(r, b, q)] += lam_phi(b, c);
                    }
                    for (Eigen::Index a = r; a < q; ++a) {
                        col[offset + vech_pos(a, r, q)] += lam_phi(a, c);
                    }
                    break;
                }
                case MatrixTag::FactorCov: {
                    for (Eigen::Index b = 0; b < q; ++b) {
                        for (Eigen::Index a = b; a < q; ++a) {
                            col[offset + vech_pos(a, b, q)] += lam(a, r) * lam(b, c);
                        }
                    }
                    break;
                }
                case MatrixTag::ResidualCov: {
                    if (r >= c) col[offset + vech_pos(r, c, q)] += 1.0;
                    break;
                }
            }
        }
        offset += q * (q + 1) / 2;
    }
    return delta;
}

Matrix numeric_jacobian(const ModelSpec& spec, const Theta& theta, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("numeric_jacobian requires h > 0");
    theta.check_conforms(spec);
    const auto p = static_cast<Eigen::Index>(spec.num_free());
    Matrix delta(static_cast<Eigen::Index>(spec.num_moments()), p);
    Theta plus = theta;
    Theta minus = theta;
    for (Eigen::Index j = 0; j < p; ++j) {
        plus.values()[j] = theta.values()[j] + h;
        minus.values()[j] = theta.values()[j] - h;
        delta.col(j) = (implied_sigma(spec, plus).values() - implied_sigma(spec, minus).values()) / (2.0 * h);
        plus.values()[j] = theta.values()[j];
        minus.values()[j] = theta.values()[j];
    }
    return delta;
}

Matrix second_derivative_contraction(const ModelSpec& spec, const Theta& theta, const Vector& weights) {
    if (static_cast<std::size_t>(weights.size()) != spec.num_moments()) {
        throw std::invalid_argument("contraction weights must have length p*");
    }
    const auto mats = build_matrices(spec, theta);
    const auto by_group = free_entries_by_group(spec);
    const auto p = static_cast<Eigen::Index>(spec.num_free());
    Matrix out = Matrix::Zero(p, p);

    Eigen::Index offset = 0;
    for (std::size_t g = 0; g < mats.size(); ++g) {
        const auto& lam = mats[g].loadings;
        const auto& phi = mats[g].factor_cov;
        const Eigen::Index q = lam.rows();
        const Eigen::Index len = q * (q + 1) / 2;

        // <W, X> over symmetric X reproduces sum_{a>=b} u_ab X_ab
        Matrix w = unvech(weights.segment(offset, len), static_cast<std::size_t>(q));
        for (Eigen::Index a = 0; a < q; ++a) {
            for (Eigen::Index b = 0; b < q; ++b) {
                if (a != b) w(a, b) *= 0.5;
            }
        }
        const Matrix w_lam = w * lam;

        for (const auto& fs : by_group[g]) {
            if (fs.entry->slot.matrix != MatrixTag::Loading) continue;
            const auto i = static_cast<Eigen::Index>(fs.entry->slot.row);
            const auto j = static_cast<Eigen::Index>(fs.entry->slot.col);
            for (const auto& ft : by_group[g]) {
                const auto& t = ft.entry->slot;
                const auto r = static_cast<Eigen::Index>(t.row);
                const auto c = static_cast<Eigen::Index>(t.col);
                if (t.matrix == MatrixTag::Loading) {
                    out(fs.column, ft.column) += 2.0 * w(i, r) * phi(j, c);
                } else if (t.matrix == MatrixTag::FactorCov) {
                    double v = 0.0;
                    if (j == r) v += w_lam(i, c);
                    if (j == c) v += w_lam(i, r);
                    out(fs.column, ft.column) += v;
                    out(ft.column, fs.column) += v;
                }
            }
        }
        offset += len;
    }
    return out;
}

}  // namespace latent_rank
