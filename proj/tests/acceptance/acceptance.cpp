// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.

#include "latent_rank/estimation.hpp"
#include "latent_rank/identification.hpp"
#include "latent_rank/jacobian.hpp"
#include "latent_rank/presets.hpp"
#include "latent_rank/simulation.hpp"

#include "oracles/sbmtmm_table.hpp"
#include "report.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

namespace lr = latent_rank;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs < budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("[%s] %d %s: %s; runtime %.2f s (limit %.0f s)\n", pass ? "PASS" : "FAIL", id, title, o.detail.c_str(),
                secs, budget_s);
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double max_rel(const lr::Matrix& a, const lr::Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

// criterion 1
Outcome jacobian_oracle() {
    constexpr double tol = 1e-10;
    const auto spec = lr::preset("sbmtmm");
    std::mt19937_64 rng(20240901);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        lr::Vector v(24);
        for (Eigen::Index j = 0; j < 24; ++j) v[j] = u(rng);
        Eigen::Matrix<double, 42, 24, Eigen::RowMajor> table;
        lr::Vector sigma(42);
        lr::oracle::sbmtmm_table(v.data(), sigma.data(), table.data());
        const lr::Matrix d = lr::analytic_jacobian(spec, lr::Theta(spec, v));
        worst = std::max(worst, (d - table).cwiseAbs().maxCoeff());
    }
    return {worst < tol, "max |analytic - table| over 20 points = " + fmt(worst) + " (< " + fmt(tol) + ")"};
}

// criterion 2
Outcome shapiro_deficiency() {
    constexpr double tol = 1e-8;
    const auto spec = lr::preset("shapiro");
    const auto r = lr::rank_report(spec, lr::shapiro_population_theta(spec));
    if (r.deficiency() != 1) return {false, "rank " + std::to_string(r.rank) + ", expected 5"};
    lr::Vector n = r.nullspace.col(0) / r.nullspace.col(0).norm();
    if (n[5] < 0) n = -n;
    lr::Vector e6 = lr::Vector::Zero(6);
    e6[5] = 1;
    const double err = (n - e6).cwiseAbs().maxCoeff();
    return {r.rank == 5 && err < tol, "rank " + std::to_string(r.rank) + ", max |n - e6| = " + fmt(err) + " (< " +
                                          fmt(tol) + ")"};
}

lr::Vector expected_direction(const lr::ModelSpec& spec, double lambda, double rho) {
    const auto roles = lr::sbmtmm_roles(spec);
    lr::Vector n(static_cast<Eigen::Index>(spec.num_free()));
    for (std::size_t j = 0; j < spec.num_free(); ++j) {
        double v = 0.0;
        switch (roles.at(spec.free_labels()[j])) {
            case lr::PodRole::LoadingMethod1: v = 1.0 / (2 * lambda * rho); break;
            case lr::PodRole::LoadingOther: v = -1.0 / (2 * lambda * rho); break;
            case lr::PodRole::ResidualMethod1: v = (rho - 1) / rho; break;
            case lr::PodRole::ResidualOther: v = -(rho - 1) / rho; break;
            case lr::PodRole::TraitCorrelation: v = 0.0; break;
            case lr::PodRole::MethodVariance1: v = -1.0; break;
            case lr::PodRole::MethodVarianceOther: v = 1.0; break;
        }
        n[static_cast<Eigen::Index>(j)] = v;
    }
    return n;
}

// criterion 3
Outcome nullspace_pattern() {
    constexpr double tol = 1e-8;
    const auto spec = lr::preset("sbmtmm");
    std::ostringstream detail;
    bool ok = true;
    for (auto [lambda, rho] : {std::pair{1.0, 0.5}, std::pair{0.8, 0.3}}) {
        lr::SbMtmmPoint p;
        p.lambda = lambda;
        p.rho12 = p.rho13 = p.rho23 = rho;
        const auto t = lr::sbmtmm_theta(spec, p);
        const auto r = lr::rank_report(spec, t);
        if (r.deficiency() != 1) {
            ok = false;
            detail << "(" << lambda << "," << rho << ") deficiency " << r.deficiency() << "; ";
            continue;
        }
        const auto phi4 = static_cast<Eigen::Index>(spec.free_index("phi4").value());
        const lr::Vector n = -r.nullspace.col(0) / r.nullspace(phi4, 0);
        const lr::Vector expected = expected_direction(spec, lambda, rho);
        const double err = (n - expected).cwiseAbs().maxCoeff();
        double rho_max = 0.0;
        for (const auto* label : {"r12", "r13", "r23"}) {
            rho_max = std::max(rho_max, std::abs(n[static_cast<Eigen::Index>(spec.free_index(label).value())]));
        }
        if (lambda == 1.0) {
            const auto at = [&](const char* label) { return n[static_cast<Eigen::Index>(spec.free_index(label).value())]; };
            // method-1 and method-2 entries for trait 1
            const double e = std::max({std::abs(at("l11") - 1), std::abs(at("l12") + 1), std::abs(at("phi5") - 1),
                                       std::abs(at("phi6") - 1)});
            if (e >= tol) ok = false;
        }
        ok = ok && err < tol && rho_max < tol;
        detail << "(lambda, rho) = (" << lambda << ", " << rho << "): max |n - symbolic| = " << fmt(err)
               << ", max |rho comp| = " << fmt(rho_max) << "; ";
    }
    detail << "tol " << fmt(tol);
    return {ok, detail.str()};
}

// criterion 4
Outcome deficiency_exclusivity() {
    const auto spec = lr::preset("sbmtmm");
    const auto base = lr::sbmtmm_population_theta(spec, 0.0);
    if (lr::rank_report(spec, base).rank != 23) return {false, "base point is not deficient"};
    std::size_t tried = 0;
    std::vector<std::string> still_deficient;
    for (const auto& label : spec.free_labels()) {
        if (label[0] != 'l' && label[0] != 'r') continue;
        lr::Theta t = base;
        t.set(label, t.at(label) + 1e-3);
        ++tried;
        if (lr::rank_report(spec, t).rank != 24) still_deficient.push_back(label);
    }
    std::string detail = std::to_string(tried - still_deficient.size()) + "/" + std::to_string(tried) +
                         " single +1e-3 perturbations (9 loadings, 3 correlations) restore rank 24";
    for (const auto& s : still_deficient) detail += " [" + s + " stays deficient]";
    return {tried == 12 && still_deficient.empty(), detail};
}

// criterion 5
Outcome derivative_correctness() {
    constexpr double tol = 1e-6;
    std::mt19937_64 rng(515);
    double worst_jac = 0.0;
    double worst_grad = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const auto spec = lr::parse_model_or_throw(lr::testing::random_model(rng));
        const auto t = lr::testing::random_theta(spec, rng);
        worst_jac = std::max(worst_jac, max_rel(lr::analytic_jacobian(spec, t), lr::numeric_jacobian(spec, t)));

        auto m = lr::testing::population_moments(spec, lr::testing::random_theta(spec, rng));
        for (auto& c : m.covariances) c += 0.1 * lr::testing::random_spd(c.rows(), rng);
        const auto s = m.moments();
        const auto v = lr::ml_weights(m.covariances);
        const auto w = m.group_weights();
        const lr::Vector g = lr::gradient(spec, t, s, v, w);
        lr::Vector fd(g.size());
        for (Eigen::Index j = 0; j < g.size(); ++j) {
            const double h = 1e-6;
            lr::Theta up = t;
            lr::Theta dn = t;
            up.values()[j] += h;
            dn.values()[j] -= h;
            fd[j] = (lr::wls_loss(spec, up, s, v, w) - lr::wls_loss(spec, dn, s, v, w)) / (2 * h);
        }
        worst_grad = std::max(worst_grad, max_rel(g, fd));
    }
    return {worst_jac < tol && worst_grad < tol, "50 random models: Jacobian rel err " + fmt(worst_jac) +
                                                     ", gradient rel err " + fmt(worst_grad) + " (< " + fmt(tol) +
                                                     ", scaled by max(1, |fd|))"};
}

// criterion 6
Outcome population_recovery() {
    constexpr double theta_tol = 1e-6;
    constexpr double loss_tol = 1e-12;
    const auto spec = lr::preset("sbmtmm");
    bool ok = true;
    double worst_theta = 0.0;
    double worst_loss = 0.0;
    std::string failed;
    for (auto opt : {lr::Optimizer::GradientDescent, lr::Optimizer::FisherScoring, lr::Optimizer::NewtonRaphson}) {
        for (double delta : {0.05, 0.2, 0.3}) {
            const auto truth = lr::sbmtmm_population_theta(spec, delta);
            const auto m = lr::testing::population_moments(spec, truth);
            lr::FitConfig c;
            c.optimizer = opt;
            if (opt == lr::Optimizer::GradientDescent) {
                c.learning_rate = 1.0;
                c.gradient_tol = 1e-12;
                c.max_iter = 200000;
            }
            const auto r = lr::fit(spec, m, c);
            const double err = (r.theta_hat.values() - truth.values()).cwiseAbs().maxCoeff();
            worst_theta = std::max(worst_theta, err);
            worst_loss = std::max(worst_loss, r.loss);
            if (!r.converged || err >= theta_tol || r.loss >= loss_tol) {
                ok = false;
                failed += std::string(" [") + lr::to_string(opt) + " delta=" + fmt(delta) + " " +
                          lr::to_string(r.stop_reason) + "]";
            }
        }
    }
    return {ok, "9 fits: max |theta - theta0| = " + fmt(worst_theta) + " (< " + fmt(theta_tol) + "), max F = " +
                    fmt(worst_loss) + " (< " + fmt(loss_tol) + ")" + failed};
}

struct Fig3 {
    lr::SimResult result;
    std::string csv;
};

lr::SimConfig figure3_config(std::size_t threads) {
    auto c = lr::default_sim_config(lr::Experiment::SbMtmm);
    c.nsim = 200;
    c.n_grid = {50, 100, 1000, 10000, 100000};
    c.delta_grid = {0.0, 0.01, 0.05, 0.3};
    c.threads = threads;
    return c;
}

const lr::ConditionSummary& cell(const lr::SimSummary& s, std::size_t n, double delta) {
    for (const auto& c : s.conditions) {
        if (c.condition.n == n && c.condition.delta == delta) return c;
    }
    throw std::logic_error("missing condition");
}

double se_diff(const lr::ConditionSummary& a, const lr::ConditionSummary& b, bool admissible) {
    return admissible ? std::hypot(a.se_admissible, b.se_admissible) : std::hypot(a.se_converged, b.se_converged);
}

// criterion 7
Outcome figure3_shape(const Fig3& f) {
    const auto& s = f.result.summary;
    std::ostringstream d;
    const std::vector<double> deltas{0.0, 0.01, 0.05, 0.3};

    bool a = true;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        for (std::size_t j = i + 1; j < deltas.size(); ++j) {
            const auto& lo = cell(s, 10000, deltas[i]);
            const auto& hi = cell(s, 10000, deltas[j]);
            if (hi.prop_admissible + 2 * se_diff(lo, hi, true) < lo.prop_admissible) a = false;
        }
    }
    d << "(a) " << (a ? "pass" : "FAIL") << " adm@1e4 by delta:";
    for (double dl : deltas) d << " " << fmt(cell(s, 10000, dl).prop_admissible);

    const auto& best = cell(s, 10000, 0.3);
    const bool b = best.prop_admissible >= 0.95;
    d << "; (b) " << (b ? "pass" : "FAIL") << " adm(0.3, 1e4) = " << fmt(best.prop_admissible) << " >= 0.95";

    const auto& pod = cell(s, 100000, 0.0);
    const double gap = best.prop_admissible - pod.prop_admissible;
    const bool c = gap > 2 * se_diff(pod, best, true);
    d << "; (c) " << (c ? "pass" : "FAIL") << " adm(0, 1e5) = " << fmt(pod.prop_admissible) << ", gap " << fmt(gap)
      << " > 2 SE " << fmt(2 * se_diff(pod, best, true));

    bool dd = false;
    const std::vector<std::size_t> ns{50, 100, 1000, 10000, 100000};
    for (std::size_t i = 0; i < ns.size(); ++i) {
        for (std::size_t j = i + 1; j < ns.size(); ++j) {
            const auto& n1 = cell(s, ns[i], 0.01);
            const auto& n2 = cell(s, ns[j], 0.01);
            if (n1.prop_converged > n2.prop_converged + 2 * se_diff(n1, n2, false)) dd = true;
        }
    }
    d << "; (d) " << (dd ? "pass" : "FAIL") << " conv@0.01 by n:";
    for (auto n : ns) d << " " << fmt(cell(s, n, 0.01).prop_converged);
    d << " (needs a drop > 2 SE)";
    return {a && b && c && dd, d.str()};
}

// criterion 8
Outcome figure2_analog() {
    constexpr double frozen_fraction = 0.49;
    auto c = lr::default_sim_config(lr::Experiment::Shapiro);
    c.nsim = 200;
    c.n_grid = {10000};
    const auto s = lr::shapiro_experiment(c);
    const auto spec = lr::experiment_spec(lr::Experiment::Shapiro);
    const auto truth = lr::shapiro_population_theta(spec);
    const auto& cs = s.result.summary.conditions.at(0);
    std::ostringstream d;
    bool ok = true;
    const double psi3_se = s.psi3.sd / std::sqrt(static_cast<double>(s.psi3.count));
    if (std::abs(s.psi3.mean) > 3 * psi3_se) ok = false;
    d << "psi3 mean " << fmt(s.psi3.mean) << " (3 SE " << fmt(3 * psi3_se) << ")";
    const bool frozen = std::abs(s.fraction_psi3_negative - frozen_fraction) < 1e-9;
    ok = ok && frozen;
    d << "; fraction negative " << fmt(s.fraction_psi3_negative) << " (frozen " << frozen_fraction << ")";
    for (const auto& p : cs.params) {
        if (p.label == "psi3") continue;
        const double se = p.all.sd / std::sqrt(static_cast<double>(p.all.count));
        const double bias = p.all.mean - truth.at(p.label);
        const bool unbiased = std::abs(bias) <= 3 * se;
        ok = ok && unbiased;
        d << "; " << p.label << " bias " << fmt(bias) << (unbiased ? " <= " : " > ") << "3 SE " << fmt(3 * se);
    }
    return {ok, d.str()};
}

// criterion 9
Outcome orthogonal_stability(const Fig3& f) {
    constexpr double ratio_floor = 5.0;
    const auto spec = lr::experiment_spec(lr::Experiment::SbMtmm);
    const auto truth = lr::sbmtmm_population_theta(spec, 0.01);
    const auto& cs = cell(f.result.summary, 10000, 0.01);
    std::map<std::string, const lr::ParamSummary*> by_label;
    for (const auto& p : cs.params) by_label[p.label] = &p;
    const double sd_l11 = by_label.at("l11")->all.sd;
    std::ostringstream d;
    bool ok = true;
    d << "sd(l11) " << fmt(sd_l11);
    for (const auto* label : {"r12", "r13", "r23"}) {
        const auto& st = by_label.at(label)->all;
        const double ratio = sd_l11 / st.sd;
        const double se = st.sd / std::sqrt(static_cast<double>(st.count));
        const double bias = st.mean - truth.at(label);
        const bool good = ratio >= ratio_floor && std::abs(bias) <= 3 * se;
        ok = ok && good;
        d << "; " << label << " ratio " << fmt(ratio) << " (>= " << ratio_floor << "), bias " << fmt(bias)
          << " (3 SE " << fmt(3 * se) << ", n " << st.count << ")";
    }
    return {ok, d.str()};
}

}  // namespace

int main() {
    report(1, "Jacobian matches the published SB-MTMM table", 1, jacobian_oracle);
    report(2, "Shapiro deficiency is e6", 1, shapiro_deficiency);
    report(3, "SB-MTMM nullspace pattern", 1, nullspace_pattern);
    report(4, "deficiency only at equal loadings and correlations", 5, deficiency_exclusivity);
    report(5, "analytic derivatives match central differences", 10, derivative_correctness);
    report(6, "population recovery for all optimizers", 10, population_recovery);

    Fig3 first;
    report(7, "Figure 3 shape (nsim 200)", 900, [&] {
        first.result = lr::run_experiment(figure3_config(1));
        first.csv = lr::cli::records_csv(lr::Experiment::SbMtmm, first.result);
        return figure3_shape(first);
    });
    report(8, "Shapiro boundary experiment (nsim 200, n 1e4)", 120, figure2_analog);
    report(9, "orthogonal correlations are stable at delta 0.01, n 1e4", 900, [&] { return orthogonal_stability(first); });
    report(10, "records identical across thread counts", 900, [&] {
        const auto again = lr::run_experiment(figure3_config(4));
        const auto csv = lr::cli::records_csv(lr::Experiment::SbMtmm, again);
        const bool same = csv == first.csv && !csv.empty();
        return Outcome{same, std::string("threads 1 vs 4: records.csv ") + (same ? "byte-identical" : "differs") +
                                 " (" + std::to_string(csv.size()) + " bytes)"};
    });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
