#include "cli.hpp"

#include "io.hpp"
#include "report.hpp"

#include "latent_rank/dsl.hpp"
#include "latent_rank/estimation.hpp"
#include "latent_rank/identification.hpp"
#include "latent_rank/jacobian.hpp"
#include "latent_rank/presets.hpp"
#include "latent_rank/simulation.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace latent_rank::cli {

namespace {

struct ModelOptions {
    std::string model_file;
    std::string preset_name;
    std::size_t groups = 1;
};

void add_model_options(CLI::App* cmd, ModelOptions& m) {
    auto* model = cmd->add_option("--model", m.model_file, "Model file in the text syntax");
    auto* pre = cmd->add_option("--preset", m.preset_name, "Built-in model")
                    ->check(CLI::IsMember(preset_names()));
    model->excludes(pre);
    cmd->add_option("--groups", m.groups, "Number of groups for --model")->check(CLI::PositiveNumber);
}

struct LoadedModel {
    ModelSpec spec;
    std::string preset_name;
};

LoadedModel load_model(const ModelOptions& m, std::ostream& err) {
    if (!m.preset_name.empty()) return {preset(m.preset_name), m.preset_name};
    if (m.model_file.empty()) throw UsageError("one of --model or --preset is required");
    const auto text = read_text_file(m.model_file);
    auto parsed = parse_model({text, m.groups});
    for (const auto& d : parsed.diagnostics) {
        err << m.model_file << ":" << d.line << ":" << d.column << ": "
            << (d.severity == Severity::Error ? "error" : "warning") << ": " << d.message << "\n";
    }
    if (!parsed.ok()) throw UsageError("model '" + m.model_file + "' has errors");
    return {std::move(*parsed.spec), {}};
}

SampleMoments load_moments(const ModelSpec& spec, const std::string& cov_file, const std::string& data_file) {
    SampleMoments moments;
    if (!cov_file.empty()) {
        moments = moments_for_spec(parse_covariance_text(read_text_file(cov_file)), spec);
    } else {
        moments = moments_from_csv(read_text_file(data_file), spec);
    }
    try {
        moments.check(spec);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return moments;
}

WeightPolicy parse_weights(const std::string& s) {
    if (s == "sample") return WeightPolicy::Sample;
    if (s == "iterative") return WeightPolicy::Iterative;
    throw UsageError("unknown weights '" + s + "'");
}

// V at theta for standard errors: normal-theory weights from Sigma(theta), falling back
// to `fallback` when Sigma(theta) is not positive-definite.
WeightMatrix weights_at(const ModelSpec& spec, const Theta& theta, const std::vector<Matrix>& fallback,
                        std::vector<std::string>* notes) {
    const auto sigma = implied_sigma(spec, theta);
    std::vector<Matrix> mats;
    for (std::size_t g = 0; g < spec.num_groups(); ++g) mats.push_back(unvech(sigma.segment(g), spec.num_observed(g)));
    try {
        return ml_weights(mats);
    } catch (const NotPositiveDefinite&) {
        if (notes) notes->push_back("implied covariance is not positive-definite; information uses fallback weights");
        return ml_weights(fallback);
    }
}

void print_summary_table(std::ostream& out, const SimResult& r) {
    out << std::left << std::setw(10) << "n" << std::setw(10) << "delta" << std::setw(14) << "converged"
        << std::setw(14) << "admissible" << "degenerate\n";
    for (const auto& c : r.summary.conditions) {
        out << std::setw(10) << c.condition.n << std::setw(10) << format_number(c.condition.delta) << std::setw(14)
            << format_number(c.prop_converged) << std::setw(14) << format_number(c.prop_admissible) << c.n_degenerate
            << "\n";
    }
}

// ---------------------------------------------------------------------------

struct FitOptions {
    ModelOptions model;
    std::string cov_file;
    std::string data_file;
    std::string start_file;
    std::string optimizer = "fisher";
    std::string weights = "iterative";
    double tol = 1e-8;
    double learning_rate = 0.1;
    int max_iter = 500;
    std::string out_dir = ".";
};

int cmd_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
    const auto loaded = load_model(o.model, err);
    const auto& spec = loaded.spec;
    if (o.cov_file.empty() == o.data_file.empty()) throw UsageError("fit needs exactly one of --cov or --data");
    const auto moments = load_moments(spec, o.cov_file, o.data_file);

    FitConfig config;
    config.optimizer = parse_optimizer(o.optimizer);
    config.weights = parse_weights(o.weights);
    config.gradient_tol = o.tol;
    config.learning_rate = o.learning_rate;
    config.max_iter = o.max_iter;
    try {
        config.check();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const Theta start = o.start_file.empty() ? spec.start_theta() : parse_theta(read_text_file(o.start_file), spec);

    FitReport report;
    report.spec = &spec;
    report.config = config;
    report.result = fit(spec, moments, config, start);
    report.total_n = moments.total_n();
    if (report.result.theta_hat.values().allFinite()) {
        const auto v = config.weights == WeightPolicy::Iterative
                           ? weights_at(spec, report.result.theta_hat, moments.covariances, &report.result.warnings)
                           : ml_weights(moments.covariances);
        report.information = fisher_information(analytic_jacobian(spec, report.result.theta_hat), v,
                                                moments.group_weights(), moments.total_n(),
                                                config.singularity_threshold);
    }

    write_file(o.out_dir, "fit.json", fit_json(report));
    const auto text = fit_text(report);
    write_file(o.out_dir, "fit.txt", text);
    out << text;
    if (!report.result.converged) return kExitNonconverged;
    return report.result.admissible ? kExitOk : kExitInadmissible;
}

// ---------------------------------------------------------------------------

struct DiagnoseOptions {
    ModelOptions model;
    std::string theta_file;
    std::optional<double> delta;
    std::string cov_file;
    double n = 1000;
    std::optional<double> rank_tol;
    double affected_tol = 1e-8;
    std::string out_dir = ".";
};

int cmd_diagnose(const DiagnoseOptions& o, std::ostream& out, std::ostream& err) {
    const auto loaded = load_model(o.model, err);
    const auto& spec = loaded.spec;

    DiagnoseReport report;
    report.spec = &spec;
    if (!o.theta_file.empty()) {
        if (o.delta) throw UsageError("--theta and --delta are mutually exclusive");
        report.theta = parse_theta(read_text_file(o.theta_file), spec);
    } else if (o.delta) {
        const auto family = loaded.preset_name.empty() ? std::nullopt : preset_family(loaded.preset_name);
        if (!family) throw UsageError("--delta needs a preset with a parameter family (sbmtmm*, shapiro*)");
        report.theta = (*family)(*o.delta);
    } else {
        report.theta = spec.start_theta();
        report.notes.push_back("evaluated at the model's start values");
    }

    report.jacobian = rank_report(spec, report.theta, o.rank_tol);
    report.affected = affected_params(report.jacobian, o.affected_tol);

    std::vector<double> gw(spec.num_groups(), 1.0 / static_cast<double>(spec.num_groups()));
    std::vector<Matrix> fallback;
    for (std::size_t g = 0; g < spec.num_groups(); ++g) fallback.push_back(Matrix::Identity(
        static_cast<Eigen::Index>(spec.num_observed(g)), static_cast<Eigen::Index>(spec.num_observed(g))));
    report.total_n = o.n;
    if (!o.cov_file.empty()) {
        const auto moments = load_moments(spec, o.cov_file, {});
        gw = moments.group_weights();
        fallback = moments.covariances;
        report.total_n = moments.total_n();
    } else {
        report.notes.push_back("standard errors assume total n = " + format_number(o.n) + " split equally over groups");
    }
    const auto v = weights_at(spec, report.theta, fallback, &report.notes);
    report.information = fisher_information(report.jacobian.jacobian, v, gw, report.total_n);

    if (loaded.preset_name == "sbmtmm" || loaded.preset_name == "sbmtmm-pervar") {
        report.pattern = nullspace_pattern_check(spec, report.theta, sbmtmm_roles(spec));
    }

    write_file(o.out_dir, "diagnose.json", diagnose_json(report));
    write_file(o.out_dir, "jacobian.csv", jacobian_csv(report.jacobian));
    write_file(o.out_dir, "nullspace.csv", nullspace_csv(report.jacobian));
    const auto text = diagnose_text(report);
    write_file(o.out_dir, "diagnose.txt", text);
    out << text;
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct RankScanOptions {
    std::string preset_name = "sbmtmm";
    std::string grid;
    std::optional<double> rank_tol;
    std::string out_dir;
};

int cmd_rank_scan(const RankScanOptions& o, std::ostream& out) {
    const auto family = preset_family(o.preset_name);
    if (!family) throw UsageError("preset '" + o.preset_name + "' has no parameter family to scan");
    std::vector<double> grid;
    if (!o.grid.empty()) {
        grid = parse_double_list(o.grid);
    } else if (o.preset_name.rfind("shapiro", 0) == 0) {
        grid = {0.0, 0.001, 0.01, 0.05, 0.1, 0.2, 0.3};
    } else {
        grid = {0.0, 0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3};
    }
    const auto rows = rank_scan(preset(o.preset_name), *family, grid, o.rank_tol);
    const auto csv = rank_scan_csv(rows);
    if (!o.out_dir.empty()) write_file(o.out_dir, "rank_scan.csv", csv);
    out << csv;
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::string config_file;
    std::string experiment;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> nsim;
    std::string n_grid;
    std::string delta_grid;
    std::optional<std::size_t> threads;
    std::string optimizer;
    std::optional<double> tol;
    std::optional<int> max_iter;
    bool svg = false;
    std::string out_dir = ".";
};

int cmd_simulate(const SimulateOptions& o, std::optional<Experiment> forced, std::ostream& out) {
    KeyValues kv;
    if (!o.config_file.empty()) kv = parse_key_values(read_text_file(o.config_file));
    if (!o.experiment.empty()) kv["experiment"] = o.experiment;
    if (forced) {
        auto it = kv.find("experiment");
        if (it != kv.end() && it->second != to_string(*forced)) {
            throw UsageError("this subcommand runs " + std::string(to_string(*forced)) + " only");
        }
        kv["experiment"] = to_string(*forced);
    }

    Experiment e = Experiment::SbMtmm;
    if (auto it = kv.find("experiment"); it != kv.end()) {
        SimConfig probe;
        apply_sim_config({{"experiment", it->second}}, probe);
        e = probe.experiment;
    }
    SimConfig config = default_sim_config(e);
    bool svg = apply_sim_config(kv, config);
    if (o.seed) config.seed = *o.seed;
    if (o.nsim) config.nsim = *o.nsim;
    if (!o.n_grid.empty()) config.n_grid = parse_size_list(o.n_grid);
    if (!o.delta_grid.empty()) config.delta_grid = parse_double_list(o.delta_grid);
    if (o.threads) config.threads = *o.threads;
    if (!o.optimizer.empty()) config.fit.optimizer = parse_optimizer(o.optimizer);
    if (o.tol) config.fit.gradient_tol = *o.tol;
    if (o.max_iter) config.fit.max_iter = *o.max_iter;
    svg = svg || o.svg;
    try {
        config.check();
    } catch (const std::invalid_argument& ex) {
        throw UsageError(ex.what());
    }

    if (config.experiment == Experiment::Shapiro) {
        const auto s = shapiro_experiment(config);
        write_file(o.out_dir, "records.csv", records_csv(e, s.result));
        write_file(o.out_dir, "summary.csv", summary_csv(e, s.result));
        write_file(o.out_dir, "param_summary.csv", param_summary_csv(e, s.result));
        write_file(o.out_dir, "summary.json", summary_json(config, s.result));
        write_file(o.out_dir, "psi3_histogram.csv", histogram_csv(s.histogram));
        write_file(o.out_dir, "shapiro_summary.json", shapiro_json(config, s));
        if (svg) write_file(o.out_dir, "figure2.svg", figure2_svg(s));
        print_summary_table(out, s.result);
        out << "psi3: mean " << format_number(s.psi3.mean) << ", sd " << format_number(s.psi3.sd)
            << ", fraction below zero " << format_number(s.fraction_psi3_negative) << "\n";
        return kExitOk;
    }

    const auto r = run_experiment(config);
    write_file(o.out_dir, "records.csv", records_csv(e, r));
    write_file(o.out_dir, "summary.csv", summary_csv(e, r));
    write_file(o.out_dir, "param_summary.csv", param_summary_csv(e, r));
    write_file(o.out_dir, "summary.json", summary_json(config, r));
    if (svg) write_file(o.out_dir, "figure3.svg", figure3_svg(r.summary));
    print_summary_table(out, r);
    return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_validate(const ModelOptions& m, std::ostream& out, std::ostream& err) {
    const auto loaded = load_model(m, err);
    const auto& spec = loaded.spec;
    out << "groups " << spec.num_groups() << ", free parameters " << spec.num_free() << ", moments "
        << spec.num_moments() << "\n";
    for (std::size_t g = 0; g < spec.num_groups(); ++g) {
        out << "group " << g + 1 << ": observed";
        for (const auto& v : spec.groups()[g].observed) out << " " << v;
        out << "; latent";
        for (const auto& v : spec.groups()[g].latent) out << " " << v;
        out << "\n";
    }
    out << "\n" << format_spec(spec);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Factor-model estimation with rank-deficiency diagnostics", "latent-rank"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "latent-rank 0.1.0");

    FitOptions fit_o;
    auto* fit_cmd = app.add_subcommand("fit", "Fit a model to covariance matrices or raw data");
    add_model_options(fit_cmd, fit_o.model);
    auto* cov = fit_cmd->add_option("--cov", fit_o.cov_file, "Covariance file, one block per group");
    auto* data = fit_cmd->add_option("--data", fit_o.data_file, "Raw data CSV with optional group column");
    cov->excludes(data);
    fit_cmd->add_option("--start", fit_o.start_file, "Start values: label = value lines or a fit.json");
    fit_cmd->add_option("--optimizer", fit_o.optimizer)->check(CLI::IsMember({"gd", "fisher", "newton"}));
    fit_cmd->add_option("--weights", fit_o.weights)->check(CLI::IsMember({"sample", "iterative"}));
    fit_cmd->add_option("--tol", fit_o.tol, "Gradient tolerance")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--lr", fit_o.learning_rate, "Gradient-descent step size")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--max-iter", fit_o.max_iter)->check(CLI::PositiveNumber);
    fit_cmd->add_option("--out-dir", fit_o.out_dir);

    DiagnoseOptions diag_o;
    auto* diag_cmd = app.add_subcommand("diagnose", "Rank, nullspace and information at a parameter point");
    add_model_options(diag_cmd, diag_o.model);
    diag_cmd->add_option("--theta", diag_o.theta_file, "Parameter point: label = value lines or a fit.json");
    diag_cmd->add_option("--delta", diag_o.delta, "Point of a preset's parameter family");
    diag_cmd->add_option("--cov", diag_o.cov_file, "Covariance file supplying group sizes");
    diag_cmd->add_option("--n", diag_o.n, "Total sample size for standard errors")->check(CLI::PositiveNumber);
    diag_cmd->add_option("--rank-tol", diag_o.rank_tol, "Absolute singular-value tolerance");
    diag_cmd->add_option("--affected-tol", diag_o.affected_tol)->check(CLI::PositiveNumber);
    diag_cmd->add_option("--out-dir", diag_o.out_dir);

    RankScanOptions scan_o;
    auto* scan_cmd = app.add_subcommand("rank-scan", "Smallest singular value and rank along a preset family");
    scan_cmd->add_option("--preset", scan_o.preset_name)->check(CLI::IsMember(preset_names()));
    scan_cmd->add_option("--grid", scan_o.grid, "Comma-separated family values");
    scan_cmd->add_option("--rank-tol", scan_o.rank_tol);
    scan_cmd->add_option("--out-dir", scan_o.out_dir);

    SimulateOptions sim_o;
    auto add_sim = [&](CLI::App* cmd, bool with_experiment) {
        cmd->add_option("--config", sim_o.config_file, "key = value configuration file");
        if (with_experiment) cmd->add_option("--experiment", sim_o.experiment);
        cmd->add_option("--seed", sim_o.seed);
        cmd->add_option("--nsim", sim_o.nsim)->check(CLI::PositiveNumber);
        cmd->add_option("--n", sim_o.n_grid, "Comma-separated sample sizes");
        cmd->add_option("--delta", sim_o.delta_grid, "Comma-separated delta values");
        cmd->add_option("--threads", sim_o.threads)->check(CLI::PositiveNumber);
        cmd->add_option("--optimizer", sim_o.optimizer)->check(CLI::IsMember({"gd", "fisher", "newton"}));
        cmd->add_option("--tol", sim_o.tol)->check(CLI::PositiveNumber);
        cmd->add_option("--max-iter", sim_o.max_iter)->check(CLI::PositiveNumber);
        cmd->add_flag("--svg", sim_o.svg, "Also write the figure");
        cmd->add_option("--out-dir", sim_o.out_dir);
    };
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo experiment");
    add_sim(sim_cmd, true);
    auto* shap_cmd = app.add_subcommand("shapiro", "Monte Carlo experiment for the three-indicator model");
    add_sim(shap_cmd, false);

    ModelOptions val_o;
    auto* val_cmd = app.add_subcommand("validate", "Parse a model and print its canonical form");
    add_model_options(val_cmd, val_o);

    std::vector<const char*> argv{"latent-rank"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (*fit_cmd) return cmd_fit(fit_o, out, err);
        if (*diag_cmd) return cmd_diagnose(diag_o, out, err);
        if (*scan_cmd) return cmd_rank_scan(scan_o, out);
        if (*sim_cmd) return cmd_simulate(sim_o, std::nullopt, out);
        if (*shap_cmd) return cmd_simulate(sim_o, Experiment::Shapiro, out);
        if (*val_cmd) return cmd_validate(val_o, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitNoInput;
    } catch (const NotPositiveDefinite& e) {
        err << "error: " << e.what() << "\n";
        return kExitNotPositiveDefinite;
    } catch (const OutputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitCannotWrite;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}

}  // namespace latent_rank::cli
