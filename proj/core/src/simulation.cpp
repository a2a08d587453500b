#include "latent_rank/simulation.hpp"

#include "latent_rank/identification.hpp"
#include "latent_rank/jacobian.hpp"
#include "latent_rank/presets.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace latent_rank {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

const std::vector<Eigen::Index> kGroup1Columns{0, 1, 3, 4, 6, 7};
const std::vector<Eigen::Index> kGroup2Columns{0, 2, 3, 5, 6, 8};

}  // namespace

PopulationModel PopulationModel::sbmtmm(double delta) {
    PopulationModel pop;
    auto& m = pop.matrices;
    m.loadings = Matrix::Zero(9, 6);
    for (int t = 0; t < 3; ++t) {
        for (int k = 0; k < 3; ++k) {
            m.loadings(3 * t + k, t) = 1.0;
            m.loadings(3 * t + k, 3 + k) = 1.0;
            pop.observed.push_back("y" + std::to_string(t + 1) + std::to_string(k + 1));
        }
    }
    m.factor_cov = Matrix::Identity(6, 6);
    m.factor_cov(0, 1) = m.factor_cov(1, 0) = 0.5 - delta;
    m.factor_cov(0, 2) = m.factor_cov(2, 0) = 0.5;
    m.factor_cov(1, 2) = m.factor_cov(2, 1) = 0.5 + delta;
    m.residual_cov = Matrix::Identity(9, 9);
    pop.sigma = m.implied();
    return pop;
}

PopulationModel PopulationModel::shapiro() {
    PopulationModel pop;
    auto& m = pop.matrices;
    m.loadings = Matrix(3, 1);
    m.loadings << 1.0, 0.4, 0.7;
    m.factor_cov = Matrix::Identity(1, 1);
    m.residual_cov = Eigen::Vector3d(1.0, 0.09, 0.0).asDiagonal();
    pop.sigma = m.implied();
    pop.observed = {"y1", "y2", "y3"};
    return pop;
}

Matrix mvn_sample(const Matrix& sigma, std::size_t n, Rng& rng) {
    if (sigma.rows() != sigma.cols()) throw std::invalid_argument("mvn_sample: covariance must be square");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
        const double lo = eig.eigenvalues().size() ? eig.eigenvalues()[0] : 0.0;
        throw NotPositiveDefinite("mvn_sample: covariance is not positive-definite", lo);
    }
    const auto q = sigma.rows();
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix z(static_cast<Eigen::Index>(n), q);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        for (Eigen::Index j = 0; j < q; ++j) z(i, j) = normal(rng);
    }
    return z * llt.matrixL().transpose();
}

Matrix sample_covariance(const Matrix& data) {
    if (data.rows() < 1) throw std::invalid_argument("sample_covariance: no observations");
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const Matrix centered = data.rowwise() - mean;
    Matrix s = (centered.transpose() * centered) / static_cast<double>(data.rows());
    return 0.5 * (s + s.transpose());
}

SampleMoments split_ballot_moments(const Matrix& data) {
    if (data.cols() != 9) throw std::invalid_argument("split_ballot_moments: expected 9 columns");
    if (data.rows() < 2) throw std::invalid_argument("split_ballot_moments: need at least 2 rows");
    const auto half = data.rows() / 2;
    const auto rest = data.rows() - half;
    SampleMoments out;
    out.covariances.push_back(sample_covariance(data.topRows(half)(Eigen::all, kGroup1Columns)));
    out.covariances.push_back(sample_covariance(data.bottomRows(rest)(Eigen::all, kGroup2Columns)));
    out.sample_sizes = {static_cast<double>(half), static_cast<double>(rest)};
    return out;
}

const char* to_string(Experiment e) {
    switch (e) {
        case Experiment::SbMtmm: return "SBMTMM";
        case Experiment::Shapiro: return "SHAPIRO";
    }
    return "?";
}

void SimConfig::check() const {
    if (n_grid.empty()) throw std::invalid_argument("simulation: n grid is empty");
    if (experiment == Experiment::SbMtmm && delta_grid.empty()) {
        throw std::invalid_argument("simulation: delta grid is empty");
    }
    if (nsim == 0) throw std::invalid_argument("simulation: nsim must be at least 1");
    for (auto n : n_grid) {
        if (n < 4) {
            throw std::invalid_argument("simulation: sample size must be at least 4");
        }
    }
    for (double d : delta_grid) {
        if (!(d >= 0.0)) throw std::invalid_argument("simulation: delta must be non-negative");
        if (experiment == Experiment::SbMtmm && !(d < 0.5)) {
            throw std::invalid_argument("simulation: delta must be below 0.5");
        }
    }
    fit.check();
}

std::vector<SimCondition> SimConfig::conditions() const {
    std::vector<SimCondition> out;
    for (auto n : n_grid) {
        if (experiment == Experiment::Shapiro) {
            out.push_back({n, 0.0});
            continue;
        }
        for (double d : delta_grid) out.push_back({n, d});
    }
    return out;
}

SimConfig default_sim_config(Experiment e) {
    SimConfig c;
    c.experiment = e;
    c.fit.weights = WeightPolicy::Iterative;
    if (e == Experiment::Shapiro) {
        c.n_grid = {10000};
        c.delta_grid = {0.0};
    }
    return c;
}

std::uint64_t replicate_seed(std::uint64_t master, const SimCondition& c, std::size_t replicate) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ static_cast<std::uint64_t>(c.n));
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(c.delta));
    return splitmix64(h ^ static_cast<std::uint64_t>(replicate));
}

ModelSpec experiment_spec(Experiment e) {
    return preset(e == Experiment::SbMtmm ? "sbmtmm-pervar" : "shapiro-direct");
}

Theta experiment_start(Experiment e, const ModelSpec& spec, double delta) {
    Theta start = spec.start_theta();
    if (e == Experiment::SbMtmm) {
        start.set("r12", 0.5 - delta);
        start.set("r13", 0.5);
        start.set("r23", 0.5 + delta);
    }
    return start;
}

SimRecord run_replicate(const SimConfig& config, const ModelSpec& spec, const SimCondition& condition,
                        std::size_t condition_index, std::size_t replicate) {
    SimRecord rec;
    rec.condition = condition;
    rec.condition_index = condition_index;
    rec.replicate = replicate;
    rec.theta = Vector::Constant(static_cast<Eigen::Index>(spec.num_free()), std::numeric_limits<double>::quiet_NaN());
    rec.loss = std::numeric_limits<double>::quiet_NaN();

    Rng rng(replicate_seed(config.seed, condition, replicate));
    SampleMoments moments;
    if (config.experiment == Experiment::SbMtmm) {
        const auto pop = PopulationModel::sbmtmm(condition.delta);
        moments = split_ballot_moments(mvn_sample(pop.sigma, condition.n, rng));
    } else {
        const auto pop = PopulationModel::shapiro();
        const Matrix data = mvn_sample(pop.sigma, condition.n, rng);
        moments.covariances = {sample_covariance(data)};
        moments.sample_sizes = {static_cast<double>(condition.n)};
    }

    try {
        moments.check(spec);
    } catch (const NotPositiveDefinite&) {
        rec.stop_reason = "DATA_DEGENERATE";
        return rec;
    }

    const auto start = experiment_start(config.experiment, spec, condition.delta);
    const auto res = fit(spec, moments, config.fit, start);
    rec.converged = res.converged;
    rec.stop_reason = to_string(res.stop_reason);
    rec.admissible = res.admissible;
    rec.theta = res.theta_hat.values();
    rec.loss = res.loss;
    rec.iterations = res.iterations;

    if (config.experiment == Experiment::Shapiro) {
        rec.se_available.assign(spec.num_free(), false);
        if (rec.theta.allFinite()) {
            const auto sigma = implied_sigma(spec, res.theta_hat);
            std::vector<Matrix> weights_from;
            for (std::size_t g = 0; g < spec.num_groups(); ++g) {
                weights_from.push_back(unvech(sigma.segment(g), spec.num_observed(g)));
            }
            WeightMatrix v;
            try {
                v = ml_weights(weights_from);
            } catch (const NotPositiveDefinite&) {
                v = ml_weights(moments.covariances);
            }
            const auto info = fisher_information(analytic_jacobian(spec, res.theta_hat), v, moments.group_weights(),
                                                 moments.total_n(), config.fit.singularity_threshold);
            for (std::size_t j = 0; j < spec.num_free(); ++j) {
                const auto& se = info.standard_errors[j];
                rec.se_available[j] = se.has_value() && std::isfinite(*se);
            }
        }
    }
    return rec;
}

Stats summarize(const std::vector<double>& values) {
    Stats s;
    double sum = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        sum += v;
        ++s.count;
    }
    if (s.count == 0) return s;
    s.mean = sum / static_cast<double>(s.count);
    if (s.count < 2) return s;
    double ss = 0.0;
    for (double v : values) {
        if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
    }
    s.sd = std::sqrt(ss / static_cast<double>(s.count - 1));
    return s;
}

double proportion_se(double p, std::size_t nsim) {
    if (nsim == 0) return 0.0;
    return std::sqrt(p * (1.0 - p) / static_cast<double>(nsim));
}

SimSummary summarize_records(const std::vector<std::string>& labels, const std::vector<SimCondition>& conditions,
                             const std::vector<SimRecord>& records) {
    SimSummary out;
    out.conditions.resize(conditions.size());
    for (std::size_t c = 0; c < conditions.size(); ++c) out.conditions[c].condition = conditions[c];

    std::vector<std::vector<const SimRecord*>> by_condition(conditions.size());
    for (const auto& r : records) {
        if (r.condition_index >= conditions.size()) {
            throw std::invalid_argument("summarize_records: record refers to an unknown condition");
        }
        by_condition[r.condition_index].push_back(&r);
    }
    for (std::size_t c = 0; c < conditions.size(); ++c) {
        auto& cs = out.conditions[c];
        const auto& rs = by_condition[c];
        cs.nsim = rs.size();
        for (const auto* r : rs) {
            cs.n_converged += r->converged ? 1 : 0;
            cs.n_admissible += r->admissible ? 1 : 0;
            cs.n_degenerate += r->stop_reason == "DATA_DEGENERATE" ? 1 : 0;
        }
        if (cs.nsim > 0) {
            cs.prop_converged = static_cast<double>(cs.n_converged) / static_cast<double>(cs.nsim);
            cs.prop_admissible = static_cast<double>(cs.n_admissible) / static_cast<double>(cs.nsim);
        }
        cs.se_converged = proportion_se(cs.prop_converged, cs.nsim);
        cs.se_admissible = proportion_se(cs.prop_admissible, cs.nsim);

        for (std::size_t j = 0; j < labels.size(); ++j) {
            std::vector<double> all;
            std::vector<double> conv;
            std::vector<double> nonconv;
            for (const auto* r : rs) {
                const double v = r->theta[static_cast<Eigen::Index>(j)];
                all.push_back(v);
                (r->converged ? conv : nonconv).push_back(v);
            }
            cs.params.push_back({labels[j], summarize(all), summarize(conv), summarize(nonconv)});
        }
    }
    return out;
}

std::size_t resolve_threads(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("LATENT_RANK_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SimResult run_experiment(const SimConfig& config) {
    config.check();
    const auto spec = experiment_spec(config.experiment);
    const auto conditions = config.conditions();
    const std::size_t total = conditions.size() * config.nsim;

    SimResult out;
    out.labels = spec.free_labels();
    out.records.resize(total);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t task = next.fetch_add(1);
            if (task >= total) return;
            const std::size_t c = task / config.nsim;
            const std::size_t rep = task % config.nsim;
            try {
                out.records[task] = run_replicate(config, spec, conditions[c], c, rep);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(total);
                return;
            }
        }
    };

    const std::size_t threads = std::min(resolve_threads(config.threads), std::max<std::size_t>(total, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    out.summary = summarize_records(out.labels, conditions, out.records);
    return out;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, std::size_t bins) {
    std::vector<double> finite;
    for (double v : values) {
        if (std::isfinite(v)) finite.push_back(v);
    }
    if (finite.empty() || bins == 0) return {};
    auto [lo_it, hi_it] = std::minmax_element(finite.begin(), finite.end());
    double lo = *lo_it;
    double hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double width = (hi - lo) / static_cast<double>(bins);
    std::vector<HistogramBin> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].lo = lo + width * static_cast<double>(b);
        out[b].hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
    }
    for (double v : finite) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        ++out[std::min(b, bins - 1)].count;
    }
    return out;
}

ShapiroSummary shapiro_experiment(const SimConfig& config) {
    if (config.experiment != Experiment::Shapiro) {
        throw std::invalid_argument("shapiro_experiment: config is not tagged SHAPIRO");
    }
    ShapiroSummary out;
    out.result = run_experiment(config);
    const auto& labels = out.result.labels;
    const auto psi3 = std::find(labels.begin(), labels.end(), "psi3") - labels.begin();

    std::vector<double> values;
    std::size_t negative = 0;
    for (const auto& r : out.result.records) {
        const double v = r.theta[psi3];
        values.push_back(v);
        if (std::isfinite(v) && v < 0.0) ++negative;
    }
    out.psi3 = summarize(values);
    out.fraction_psi3_negative =
        out.psi3.count ? static_cast<double>(negative) / static_cast<double>(out.psi3.count) : 0.0;
    out.histogram = histogram(values, 30);

    for (std::size_t j = 0; j < labels.size(); ++j) {
        std::size_t available = 0;
        for (const auto& r : out.result.records) {
            if (j < r.se_available.size() && r.se_available[j]) ++available;
        }
        const auto n = out.result.records.size();
        out.se_availability.emplace_back(labels[j], n ? static_cast<double>(available) / static_cast<double>(n) : 0.0);
    }
    return out;
}

}  // namespace latent_rank
