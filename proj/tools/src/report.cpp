#include "report.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace latent_rank::cli {

using ojson = nlohmann::ordered_json;

namespace {

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson vector_json(const std::vector<std::string>& labels, const Vector& v) {
    ojson o = ojson::object();
    for (std::size_t j = 0; j < labels.size(); ++j) o[labels[j]] = number_or_null(v[static_cast<Eigen::Index>(j)]);
    return o;
}

std::string fixed(double v, int digits) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
    if (ec != std::errc()) return "0";
    return {buf.data(), ptr};
}

std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr std::array<const char*, 8> kPalette{"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                              "#66a61e", "#e6ab02", "#a6761d", "#666666"};

std::string pad_right(const std::string& s, std::size_t w) {
    return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

}  // namespace

void write_file(const std::string& dir, const std::string& name, const std::string& contents) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw OutputError("cannot create directory '" + dir + "': " + ec.message());
    const auto path = fs::path(dir) / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw OutputError("cannot write '" + path.string() + "'");
    out << contents;
    if (!out) throw OutputError("failed writing '" + path.string() + "'");
}

std::string format_number(double v) {
    if (std::isnan(v)) return "NA";
    if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) return "NA";
    return {buf.data(), ptr};
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// ---------------------------------------------------------------------------

std::string fit_json(const FitReport& r) {
    const auto& spec = *r.spec;
    const auto& res = r.result;
    ojson j;
    j["converged"] = res.converged;
    j["stop_reason"] = to_string(res.stop_reason);
    j["admissible"] = res.admissible;
    j["inadmissible_slots"] = res.inadmissible_slots;
    j["loss"] = number_or_null(res.loss);
    j["iterations"] = res.iterations;
    j["gradient_norm"] = number_or_null(res.gradient_norm);
    j["optimizer"] = to_string(r.config.optimizer);
    j["weights"] = to_string(r.config.weights);
    j["total_n"] = r.total_n;
    j["theta"] = vector_json(spec.free_labels(), res.theta_hat.values());
    ojson se = ojson::object();
    for (std::size_t k = 0; k < spec.num_free(); ++k) {
        const auto& label = spec.free_labels()[k];
        if (r.information && r.information->standard_errors[k] && std::isfinite(*r.information->standard_errors[k])) {
            se[label] = *r.information->standard_errors[k];
        } else {
            se[label] = "UNAVAILABLE";
        }
    }
    j["standard_errors"] = se;
    j["information_condition_number"] =
        r.information ? number_or_null(r.information->condition_number) : ojson(nullptr);
    j["warnings"] = res.warnings;
    return j.dump(2) + "\n";
}

std::string fit_text(const FitReport& r) {
    const auto& spec = *r.spec;
    const auto& res = r.result;
    std::ostringstream os;
    os << "status:      " << (res.converged ? "converged" : "not converged") << " (" << to_string(res.stop_reason)
       << ")\n";
    os << "optimizer:   " << to_string(r.config.optimizer) << ", weights " << to_string(r.config.weights) << "\n";
    os << "iterations:  " << res.iterations << "\n";
    os << "loss:        " << format_number(res.loss) << "\n";
    os << "max |grad|:  " << format_number(res.gradient_norm) << "\n";
    os << "admissible:  " << (res.admissible ? "yes" : "no") << "\n";
    for (const auto& s : res.inadmissible_slots) os << "  offending: " << s << "\n";
    if (r.information) os << "cond(I):     " << format_number(r.information->condition_number) << "\n";
    os << "\n" << pad_right("parameter", 12) << pad_right("estimate", 24) << "se\n";
    for (std::size_t k = 0; k < spec.num_free(); ++k) {
        std::string se = "UNAVAILABLE";
        if (r.information && r.information->standard_errors[k] && std::isfinite(*r.information->standard_errors[k])) {
            se = format_number(*r.information->standard_errors[k]);
        }
        os << pad_right(spec.free_labels()[k], 12)
           << pad_right(format_number(res.theta_hat.values()[static_cast<Eigen::Index>(k)]), 24) << se << "\n";
    }
    for (const auto& w : res.warnings) os << "warning: " << w << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------

std::string diagnose_json(const DiagnoseReport& r) {
    const auto& spec = *r.spec;
    ojson j;
    j["num_moments"] = spec.num_moments();
    j["num_params"] = spec.num_free();
    j["rank"] = r.jacobian.rank;
    j["deficiency"] = r.jacobian.deficiency();
    j["rank_tolerance"] = r.jacobian.tolerance;
    ojson sv = ojson::array();
    for (Eigen::Index i = 0; i < r.jacobian.singular_values.size(); ++i) sv.push_back(r.jacobian.singular_values[i]);
    j["singular_values"] = sv;
    j["theta"] = vector_json(spec.free_labels(), r.theta.values());
    j["affected"] = r.affected.affected;
    j["unaffected"] = r.affected.orthogonal;
    ojson comps = ojson::object();
    for (const auto& [label, v] : r.affected.components) comps[label] = v;
    j["nullspace_max_abs_component"] = comps;
    ojson info;
    info["condition_number"] = number_or_null(r.information.condition_number);
    info["singular"] = r.information.singular;
    info["total_n"] = r.total_n;
    ojson se = ojson::object();
    for (std::size_t k = 0; k < spec.num_free(); ++k) {
        const auto& s = r.information.standard_errors[k];
        se[spec.free_labels()[k]] = s && std::isfinite(*s) ? ojson(*s) : ojson("UNAVAILABLE");
    }
    info["standard_errors"] = se;
    j["information"] = info;
    if (r.pattern) {
        ojson p;
        p["applicable"] = r.pattern->applicable;
        p["passed"] = r.pattern->passed;
        p["lambda"] = r.pattern->lambda;
        p["rho"] = r.pattern->rho;
        ojson cs = ojson::array();
        for (const auto& c : r.pattern->components) {
            cs.push_back({{"label", c.label}, {"expected", c.expected}, {"observed", c.observed}});
        }
        p["components"] = cs;
        p["detail"] = r.pattern->detail;
        j["pattern_check"] = p;
    }
    j["notes"] = r.notes;
    return j.dump(2) + "\n";
}

std::string diagnose_text(const DiagnoseReport& r) {
    const auto& spec = *r.spec;
    std::ostringstream os;
    os << "Jacobian: " << spec.num_moments() << " moments x " << spec.num_free() << " parameters, rank "
       << r.jacobian.rank << " (tolerance " << format_number(r.jacobian.tolerance) << ")\n";
    const auto& sv = r.jacobian.singular_values;
    if (sv.size()) {
        os << "singular values: largest " << format_number(sv[0]) << ", smallest " << format_number(sv[sv.size() - 1])
           << "\n";
    }
    if (r.jacobian.deficiency() == 0) {
        os << "no deficiency detected\n";
    } else {
        os << "rank deficiency " << r.jacobian.deficiency() << "\n";
        os << "affected by the deficiency:";
        for (const auto& l : r.affected.affected) os << " " << l;
        os << "\nunaffected by the deficiency:";
        if (r.affected.orthogonal.empty()) os << " (none)";
        for (const auto& l : r.affected.orthogonal) os << " " << l;
        os << "\n\nnullspace basis (unit columns):\n";
        const auto& ns = r.jacobian.nullspace;
        for (Eigen::Index i = 0; i < ns.rows(); ++i) {
            os << "  " << pad_right(spec.free_labels()[static_cast<std::size_t>(i)], 10);
            for (Eigen::Index c = 0; c < ns.cols(); ++c) {
                const double v = std::abs(ns(i, c)) < 1e-12 ? 0.0 : ns(i, c);
                os << " " << pad_right(fixed(v, 8), 12);
            }
            os << "\n";
        }
    }
    os << "\ninformation: cond " << format_number(r.information.condition_number)
       << (r.information.singular ? " (singular; standard errors unavailable)" : "") << "\n";
    if (r.pattern && r.pattern->applicable) {
        os << "split-ballot nullspace pattern at lambda=" << format_number(r.pattern->lambda)
           << ", rho=" << format_number(r.pattern->rho) << ": " << (r.pattern->passed ? "matches" : "does not match")
           << "\n";
    }
    for (const auto& n : r.notes) os << "note: " << n << "\n";
    return os.str();
}

std::string jacobian_csv(const JacobianReport& r) {
    std::ostringstream os;
    os << "moment";
    for (const auto& c : r.col_labels) os << "," << csv_field(c);
    os << "\n";
    for (Eigen::Index i = 0; i < r.jacobian.rows(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        os << csv_field(idx < r.row_labels.size() ? r.row_labels[idx] : std::to_string(i + 1));
        for (Eigen::Index j = 0; j < r.jacobian.cols(); ++j) os << "," << format_number(r.jacobian(i, j));
        os << "\n";
    }
    return os.str();
}

std::string nullspace_csv(const JacobianReport& r) {
    std::ostringstream os;
    os << "parameter";
    for (Eigen::Index c = 0; c < r.nullspace.cols(); ++c) os << ",n" << (c + 1);
    os << "\n";
    for (Eigen::Index i = 0; i < r.nullspace.rows(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        os << csv_field(idx < r.col_labels.size() ? r.col_labels[idx] : std::to_string(i + 1));
        for (Eigen::Index c = 0; c < r.nullspace.cols(); ++c) os << "," << format_number(r.nullspace(i, c));
        os << "\n";
    }
    return os.str();
}

std::string rank_scan_csv(const std::vector<RankScanRow>& rows) {
    std::ostringstream os;
    os << "delta,smallest_singular_value,rank,num_params,condition_number\n";
    for (const auto& r : rows) {
        os << format_number(r.delta) << "," << format_number(r.smallest_singular_value) << "," << r.rank << ","
           << r.num_params << "," << format_number(r.condition_number) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------

std::string records_csv(Experiment e, const SimResult& r) {
    std::ostringstream os;
    os << "experiment,n,delta,rep,converged,stop_reason,admissible";
    for (const auto& l : r.labels) os << "," << csv_field(l);
    os << ",loss\n";
    for (const auto& rec : r.records) {
        os << to_string(e) << "," << rec.condition.n << "," << format_number(rec.condition.delta) << ","
           << rec.replicate + 1 << "," << (rec.converged ? "true" : "false") << "," << rec.stop_reason << ","
           << (rec.admissible ? "true" : "false");
        for (Eigen::Index j = 0; j < rec.theta.size(); ++j) os << "," << format_number(rec.theta[j]);
        os << "," << format_number(rec.loss) << "\n";
    }
    return os.str();
}

std::string summary_csv(Experiment e, const SimResult& r) {
    std::ostringstream os;
    os << "experiment,n,delta,nsim,n_converged,prop_converged,se_converged,n_admissible,prop_admissible,"
          "se_admissible,n_degenerate\n";
    for (const auto& c : r.summary.conditions) {
        os << to_string(e) << "," << c.condition.n << "," << format_number(c.condition.delta) << "," << c.nsim << ","
           << c.n_converged << "," << format_number(c.prop_converged) << "," << format_number(c.se_converged) << ","
           << c.n_admissible << "," << format_number(c.prop_admissible) << "," << format_number(c.se_admissible)
           << "," << c.n_degenerate << "\n";
    }
    return os.str();
}

std::string param_summary_csv(Experiment e, const SimResult& r) {
    std::ostringstream os;
    os << "experiment,n,delta,parameter,subset,count,mean,sd\n";
    for (const auto& c : r.summary.conditions) {
        for (const auto& p : c.params) {
            const std::pair<const char*, const Stats*> subsets[] = {
                {"all", &p.all}, {"converged", &p.converged}, {"nonconverged", &p.nonconverged}};
            for (const auto& [name, s] : subsets) {
                os << to_string(e) << "," << c.condition.n << "," << format_number(c.condition.delta) << ","
                   << csv_field(p.label) << "," << name << "," << s->count << ","
                   << (s->count ? format_number(s->mean) : "NA") << "," << (s->count > 1 ? format_number(s->sd) : "NA")
                   << "\n";
            }
        }
    }
    return os.str();
}

std::string summary_json(const SimConfig& config, const SimResult& r) {
    ojson j;
    j["experiment"] = to_string(config.experiment);
    j["seed"] = config.seed;
    j["nsim"] = config.nsim;
    j["optimizer"] = to_string(config.fit.optimizer);
    j["weights"] = to_string(config.fit.weights);
    j["gradient_tol"] = config.fit.gradient_tol;
    j["max_iter"] = config.fit.max_iter;
    j["parameters"] = r.labels;
    ojson conds = ojson::array();
    for (const auto& c : r.summary.conditions) {
        ojson o;
        o["n"] = c.condition.n;
        o["delta"] = c.condition.delta;
        o["nsim"] = c.nsim;
        o["n_converged"] = c.n_converged;
        o["prop_converged"] = c.prop_converged;
        o["se_converged"] = c.se_converged;
        o["n_admissible"] = c.n_admissible;
        o["prop_admissible"] = c.prop_admissible;
        o["se_admissible"] = c.se_admissible;
        o["n_degenerate"] = c.n_degenerate;
        ojson params = ojson::object();
        for (const auto& p : c.params) {
            ojson ps;
            for (const auto& [name, s] : {std::pair<const char*, const Stats*>{"all", &p.all},
                                          {"converged", &p.converged},
                                          {"nonconverged", &p.nonconverged}}) {
                ps[name] = {{"count", s->count},
                            {"mean", s->count ? ojson(s->mean) : ojson(nullptr)},
                            {"sd", s->count > 1 ? ojson(s->sd) : ojson(nullptr)}};
            }
            params[p.label] = ps;
        }
        o["parameters"] = params;
        conds.push_back(o);
    }
    j["conditions"] = conds;
    return j.dump(2) + "\n";
}

std::string figure3_svg(const SimSummary& s) {
    constexpr double panel_w = 400;
    constexpr double panel_h = 280;
    constexpr double left = 60;
    constexpr double top = 50;
    constexpr double gap = 90;
    constexpr double legend_w = 130;
    const double width = left + 2 * panel_w + gap + legend_w;
    const double height = top + panel_h + 70;

    std::vector<double> deltas;
    double xmin = 1e300;
    double xmax = -1e300;
    for (const auto& c : s.conditions) {
        if (std::find(deltas.begin(), deltas.end(), c.condition.delta) == deltas.end()) {
            deltas.push_back(c.condition.delta);
        }
        const double x = std::log10(static_cast<double>(c.condition.n));
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
    }
    if (s.conditions.empty()) {
        xmin = 0;
        xmax = 1;
    }
    xmin = std::floor(xmin * 2) / 2 - 0.25;
    xmax = std::ceil(xmax * 2) / 2 + 0.25;

    std::ostringstream os;
    os << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << fixed(width, 0) << R"(" height=")"
       << fixed(height, 0) << R"(" font-family="sans-serif" font-size="12">)" << "\n";
    os << R"(<rect width="100%" height="100%" fill="white"/>)" << "\n";

    struct Panel {
        const char* title;
        bool admissible;
    };
    const Panel panels[] = {{"Proportion admissible", true}, {"Proportion converged", false}};
    for (int p = 0; p < 2; ++p) {
        const double x0 = left + p * (panel_w + gap);
        auto px = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * panel_w; };
        auto py = [&](double y) { return top + (1.0 - y) * panel_h; };

        os << "<g>\n";
        os << R"(<text x=")" << fixed(x0 + panel_w / 2, 1) << R"(" y=")" << fixed(top - 20, 1)
           << R"(" text-anchor="middle" font-size="14">)" << panels[p].title << "</text>\n";
        os << R"(<rect x=")" << fixed(x0, 1) << R"(" y=")" << fixed(top, 1) << R"(" width=")" << fixed(panel_w, 1)
           << R"(" height=")" << fixed(panel_h, 1) << R"(" fill="none" stroke="black"/>)" << "\n";
        for (int k = 0; k <= 4; ++k) {
            const double y = k / 4.0;
            os << R"(<line x1=")" << fixed(x0, 1) << R"(" x2=")" << fixed(x0 + panel_w, 1) << R"(" y1=")"
               << fixed(py(y), 1) << R"(" y2=")" << fixed(py(y), 1) << R"(" stroke="#dddddd"/>)" << "\n";
            os << R"(<text x=")" << fixed(x0 - 6, 1) << R"(" y=")" << fixed(py(y) + 4, 1)
               << R"(" text-anchor="end">)" << fixed(y, 2) << "</text>\n";
        }
        for (int e = static_cast<int>(std::ceil(xmin)); e <= static_cast<int>(std::floor(xmax)); ++e) {
            os << R"(<line x1=")" << fixed(px(e), 1) << R"(" x2=")" << fixed(px(e), 1) << R"(" y1=")"
               << fixed(top + panel_h, 1) << R"(" y2=")" << fixed(top + panel_h + 5, 1) << R"(" stroke="black"/>)"
               << "\n";
            os << R"(<text x=")" << fixed(px(e), 1) << R"(" y=")" << fixed(top + panel_h + 19, 1)
               << R"(" text-anchor="middle">)" << e << "</text>\n";
        }
        os << R"(<text x=")" << fixed(x0 + panel_w / 2, 1) << R"(" y=")" << fixed(top + panel_h + 40, 1)
           << R"(" text-anchor="middle">log10 n</text>)" << "\n";

        for (std::size_t d = 0; d < deltas.size(); ++d) {
            const char* colour = kPalette[d % kPalette.size()];
            std::vector<const ConditionSummary*> series;
            for (const auto& c : s.conditions) {
                if (c.condition.delta == deltas[d]) series.push_back(&c);
            }
            std::sort(series.begin(), series.end(),
                      [](const auto* a, const auto* b) { return a->condition.n < b->condition.n; });
            os << R"(<polyline fill="none" stroke=")" << colour << R"(" stroke-width="1.5" points=")";
            for (std::size_t i = 0; i < series.size(); ++i) {
                const auto* c = series[i];
                const double y = panels[p].admissible ? c->prop_admissible : c->prop_converged;
                os << (i ? " " : "") << fixed(px(std::log10(static_cast<double>(c->condition.n))), 1) << ","
                   << fixed(py(y), 1);
            }
            os << R"("/>)" << "\n";
            for (const auto* c : series) {
                const double y = panels[p].admissible ? c->prop_admissible : c->prop_converged;
                const double se = panels[p].admissible ? c->se_admissible : c->se_converged;
                const double x = px(std::log10(static_cast<double>(c->condition.n)));
                const double lo = std::max(0.0, y - 2 * se);
                const double hi = std::min(1.0, y + 2 * se);
                os << R"(<line x1=")" << fixed(x, 1) << R"(" x2=")" << fixed(x, 1) << R"(" y1=")" << fixed(py(lo), 1)
                   << R"(" y2=")" << fixed(py(hi), 1) << R"(" stroke=")" << colour << R"("/>)" << "\n";
                os << R"(<circle cx=")" << fixed(x, 1) << R"(" cy=")" << fixed(py(y), 1) << R"(" r="3" fill=")"
                   << colour << R"("/>)" << "\n";
            }
        }
        os << "</g>\n";
    }

    const double lx = left + 2 * panel_w + gap + 10;
    os << R"(<text x=")" << fixed(lx, 1) << R"(" y=")" << fixed(top + 4, 1) << R"(">delta</text>)" << "\n";
    for (std::size_t d = 0; d < deltas.size(); ++d) {
        const double y = top + 22 + 18 * static_cast<double>(d);
        os << R"(<line x1=")" << fixed(lx, 1) << R"(" x2=")" << fixed(lx + 24, 1) << R"(" y1=")" << fixed(y, 1)
           << R"(" y2=")" << fixed(y, 1) << R"(" stroke=")" << kPalette[d % kPalette.size()]
           << R"(" stroke-width="2"/>)" << "\n";
        os << R"(<text x=")" << fixed(lx + 30, 1) << R"(" y=")" << fixed(y + 4, 1) << R"(">)"
           << svg_escape(format_number(deltas[d])) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string histogram_csv(const std::vector<HistogramBin>& bins) {
    std::ostringstream os;
    os << "lo,hi,count\n";
    for (const auto& b : bins) os << format_number(b.lo) << "," << format_number(b.hi) << "," << b.count << "\n";
    return os.str();
}

std::string shapiro_json(const SimConfig& config, const ShapiroSummary& s) {
    ojson j;
    j["experiment"] = to_string(config.experiment);
    j["seed"] = config.seed;
    j["nsim"] = config.nsim;
    j["n_grid"] = config.n_grid;
    j["fraction_psi3_negative"] = s.fraction_psi3_negative;
    j["psi3"] = {{"count", s.psi3.count}, {"mean", s.psi3.mean}, {"sd", s.psi3.sd}};
    ojson avail = ojson::object();
    for (const auto& [label, frac] : s.se_availability) avail[label] = frac;
    j["se_available_fraction"] = avail;
    ojson means = ojson::object();
    for (std::size_t k = 0; k < s.result.labels.size(); ++k) {
        std::vector<double> v;
        for (const auto& r : s.result.records) v.push_back(r.theta[static_cast<Eigen::Index>(k)]);
        const auto st = summarize(v);
        means[s.result.labels[k]] = {{"count", st.count}, {"mean", st.mean}, {"sd", st.sd}};
    }
    j["parameters"] = means;
    return j.dump(2) + "\n";
}

std::string figure2_svg(const ShapiroSummary& s) {
    constexpr double left = 60;
    constexpr double top = 40;
    constexpr double w = 520;
    constexpr double h = 300;
    const auto& bins = s.histogram;
    std::size_t max_count = 1;
    for (const auto& b : bins) max_count = std::max(max_count, b.count);
    const double lo = bins.empty() ? -1.0 : bins.front().lo;
    const double hi = bins.empty() ? 1.0 : bins.back().hi;
    auto px = [&](double x) { return left + (x - lo) / (hi - lo) * w; };
    auto py = [&](double c) { return top + h - c / static_cast<double>(max_count) * h; };

    std::ostringstream os;
    os << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << fixed(left + w + 40, 0) << R"(" height=")"
       << fixed(top + h + 60, 0) << R"(" font-family="sans-serif" font-size="12">)" << "\n";
    os << R"(<rect width="100%" height="100%" fill="white"/>)" << "\n";
    os << R"(<text x=")" << fixed(left + w / 2, 1) << R"(" y="22" text-anchor="middle" font-size="14">)"
       << "psi3 estimates (" << fixed(100.0 * s.fraction_psi3_negative, 1) << "% below zero)</text>\n";
    for (const auto& b : bins) {
        const bool negative = b.hi <= 0.0;
        os << R"(<rect x=")" << fixed(px(b.lo), 2) << R"(" y=")" << fixed(py(static_cast<double>(b.count)), 2)
           << R"(" width=")" << fixed(std::max(0.0, px(b.hi) - px(b.lo)), 2) << R"(" height=")"
           << fixed(top + h - py(static_cast<double>(b.count)), 2) << R"(" fill=")"
           << (negative ? "#d95f02" : "#7570b3") << R"(" stroke="white" stroke-width="0.5"/>)" << "\n";
    }
    os << R"(<line x1=")" << fixed(left, 1) << R"(" x2=")" << fixed(left + w, 1) << R"(" y1=")" << fixed(top + h, 1)
       << R"(" y2=")" << fixed(top + h, 1) << R"(" stroke="black"/>)" << "\n";
    if (lo < 0.0 && hi > 0.0) {
        os << R"(<line x1=")" << fixed(px(0.0), 1) << R"(" x2=")" << fixed(px(0.0), 1) << R"(" y1=")" << fixed(top, 1)
           << R"(" y2=")" << fixed(top + h, 1) << R"(" stroke="black" stroke-dasharray="4,3"/>)" << "\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double x = lo + (hi - lo) * k / 4.0;
        os << R"(<text x=")" << fixed(px(x), 1) << R"(" y=")" << fixed(top + h + 18, 1)
           << R"(" text-anchor="middle">)" << svg_escape(format_number(std::round(x * 1e4) / 1e4)) << "</text>\n";
    }
    os << R"(<text x=")" << fixed(left - 8, 1) << R"(" y=")" << fixed(top + 4, 1) << R"(" text-anchor="end">)"
       << max_count << "</text>\n";
    os << R"(<text x=")" << fixed(left - 8, 1) << R"(" y=")" << fixed(top + h, 1)
       << R"(" text-anchor="end">0</text>)" << "\n";
    os << R"(<text x=")" << fixed(left + w / 2, 1) << R"(" y=")" << fixed(top + h + 40, 1)
       << R"(" text-anchor="middle">estimated psi3</text>)" << "\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace latent_rank::cli
