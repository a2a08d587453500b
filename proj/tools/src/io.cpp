#include "io.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace latent_rank::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_number(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && first != last;
}

double number_or_throw(const std::string& s, const std::string& where) {
    double v = 0.0;
    if (!parse_number(s, v)) throw UsageError(where + ": '" + s + "' is not a number");
    return v;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::vector<CovarianceBlock> parse_covariance_text(const std::string& text) {
    std::vector<CovarianceBlock> blocks;
    const auto lines = split_lines(text);
    std::size_t i = 0;
    auto skip_blank = [&] {
        while (i < lines.size()) {
            const auto t = trim(lines[i]);
            if (!t.empty() && t[0] != '#') break;
            ++i;
        }
    };
    for (skip_blank(); i < lines.size(); skip_blank()) {
        CovarianceBlock b;
        const std::size_t header_line = i + 1;
        b.names = split_fields(lines[i++]);
        const auto q = static_cast<Eigen::Index>(b.names.size());
        b.matrix = Matrix(q, q);
        for (Eigen::Index r = 0; r < q; ++r, ++i) {
            if (i >= lines.size() || trim(lines[i]).empty()) {
                throw UsageError("covariance block at line " + std::to_string(header_line) + " has " +
                                 std::to_string(r) + " rows, expected " + std::to_string(q));
            }
            const auto fields = split_fields(lines[i]);
            if (static_cast<Eigen::Index>(fields.size()) != q) {
                throw UsageError("line " + std::to_string(i + 1) + ": expected " + std::to_string(q) + " values");
            }
            for (Eigen::Index c = 0; c < q; ++c) {
                b.matrix(r, c) = number_or_throw(fields[static_cast<std::size_t>(c)], "line " + std::to_string(i + 1));
            }
        }
        const auto n_line = i < lines.size() ? trim(lines[i]) : std::string();
        if (n_line.rfind("n=", 0) != 0 && n_line.rfind("n =", 0) != 0) {
            throw UsageError("line " + std::to_string(i + 1) + ": expected 'n=<int>' after the matrix rows");
        }
        const auto value = trim(n_line.substr(n_line.find('=') + 1));
        b.n = number_or_throw(value, "line " + std::to_string(i + 1));
        if (b.n != std::floor(b.n) || b.n < 1) {
            throw UsageError("line " + std::to_string(i + 1) + ": sample size must be a positive integer");
        }
        ++i;
        if (q > 0 && (b.matrix - b.matrix.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
            throw UsageError("covariance block at line " + std::to_string(header_line) + " is not symmetric");
        }
        b.matrix = 0.5 * (b.matrix + b.matrix.transpose());
        blocks.push_back(std::move(b));
    }
    if (blocks.empty()) throw UsageError("covariance file contains no blocks");
    return blocks;
}

SampleMoments moments_for_spec(const std::vector<CovarianceBlock>& blocks, const ModelSpec& spec) {
    if (blocks.size() != spec.num_groups()) {
        throw UsageError("covariance input has " + std::to_string(blocks.size()) + " groups, model has " +
                         std::to_string(spec.num_groups()));
    }
    SampleMoments out;
    for (std::size_t g = 0; g < blocks.size(); ++g) {
        const auto& names = spec.groups()[g].observed;
        std::vector<Eigen::Index> idx;
        for (const auto& name : names) {
            auto it = std::find(blocks[g].names.begin(), blocks[g].names.end(), name);
            if (it == blocks[g].names.end()) {
                throw UsageError("group " + std::to_string(g + 1) + ": covariance input lacks variable '" + name + "'");
            }
            idx.push_back(it - blocks[g].names.begin());
        }
        out.covariances.push_back(blocks[g].matrix(idx, idx));
        out.sample_sizes.push_back(blocks[g].n);
    }
    return out;
}

std::string format_covariance_text(const std::vector<CovarianceBlock>& blocks) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const auto& b = blocks[k];
        if (k) os << '\n';
        for (std::size_t j = 0; j < b.names.size(); ++j) os << (j ? " " : "") << b.names[j];
        os << '\n';
        for (Eigen::Index r = 0; r < b.matrix.rows(); ++r) {
            for (Eigen::Index c = 0; c < b.matrix.cols(); ++c) os << (c ? " " : "") << b.matrix(r, c);
            os << '\n';
        }
        os << "n=" << static_cast<long long>(b.n) << '\n';
    }
    return os.str();
}

SampleMoments moments_from_csv(const std::string& text, const ModelSpec& spec) {
    auto lines = split_lines(text);
    lines.erase(std::remove_if(lines.begin(), lines.end(), [](const std::string& l) { return trim(l).empty(); }),
                lines.end());
    if (lines.empty()) throw UsageError("data file is empty");
    const auto header = split_csv_row(lines[0]);
    const auto group_col = std::find(header.begin(), header.end(), "group") - header.begin();
    const bool has_group = static_cast<std::size_t>(group_col) < header.size();
    if (!has_group && spec.num_groups() > 1) {
        throw UsageError("data for a multi-group model needs a 'group' column");
    }

    std::vector<std::vector<std::size_t>> columns(spec.num_groups());
    for (std::size_t g = 0; g < spec.num_groups(); ++g) {
        for (const auto& name : spec.groups()[g].observed) {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) throw UsageError("data file lacks column '" + name + "'");
            columns[g].push_back(static_cast<std::size_t>(it - header.begin()));
        }
    }

    std::vector<std::vector<std::vector<double>>> rows(spec.num_groups());
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto fields = split_csv_row(lines[li]);
        if (fields.size() != header.size()) {
            throw UsageError("data line " + std::to_string(li + 1) + ": expected " + std::to_string(header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        }
        std::size_t g = 0;
        if (has_group) {
            const double gv = number_or_throw(fields[static_cast<std::size_t>(group_col)],
                                              "data line " + std::to_string(li + 1));
            if (gv != std::floor(gv) || gv < 1 || gv > static_cast<double>(spec.num_groups())) {
                throw UsageError("data line " + std::to_string(li + 1) + ": group must be 1.." +
                                 std::to_string(spec.num_groups()));
            }
            g = static_cast<std::size_t>(gv) - 1;
        }
        std::vector<double> row;
        for (auto c : columns[g]) {
            row.push_back(number_or_throw(fields[c], "data line " + std::to_string(li + 1) + ", column '" +
                                                         header[c] + "'"));
        }
        rows[g].push_back(std::move(row));
    }

    SampleMoments out;
    for (std::size_t g = 0; g < spec.num_groups(); ++g) {
        const auto n = static_cast<Eigen::Index>(rows[g].size());
        const auto q = static_cast<Eigen::Index>(columns[g].size());
        if (n < 2) throw UsageError("group " + std::to_string(g + 1) + " has fewer than 2 rows of data");
        Matrix data(n, q);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < q; ++j) {
                data(i, j) = rows[g][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
        }
        out.covariances.push_back(sample_covariance(data));
        out.sample_sizes.push_back(static_cast<double>(n));
    }
    return out;
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        auto line = lines[i];
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(i + 1) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw UsageError("config line " + std::to_string(i + 1) + ": empty key");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

Optimizer parse_optimizer(const std::string& name) {
    if (name == "gd" || name == "gradient_descent") return Optimizer::GradientDescent;
    if (name == "fisher" || name == "fisher_scoring") return Optimizer::FisherScoring;
    if (name == "newton" || name == "newton_raphson") return Optimizer::NewtonRaphson;
    throw UsageError("unknown optimizer '" + name + "' (expected gd, fisher or newton)");
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& f : split_fields(text)) out.push_back(number_or_throw(f, "list"));
    if (out.empty()) throw UsageError("empty list");
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    for (double v : parse_double_list(text)) {
        if (v < 1 || v != std::floor(v) || v > 1e12) throw UsageError("expected positive integers in list");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

bool apply_sim_config(const KeyValues& kv, SimConfig& config) {
    bool svg = false;
    for (const auto& [key, value] : kv) {
        if (key == "experiment") {
            std::string v = value;
            std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::toupper(c); });
            if (v == "SBMTMM") {
                config.experiment = Experiment::SbMtmm;
            } else if (v == "SHAPIRO") {
                config.experiment = Experiment::Shapiro;
            } else {
                throw UsageError("config: unknown experiment '" + value + "'");
            }
        } else if (key == "n_grid") {
            config.n_grid = parse_size_list(value);
        } else if (key == "delta_grid") {
            config.delta_grid = parse_double_list(value);
        } else if (key == "nsim") {
            config.nsim = parse_size_list(value).at(0);
        } else if (key == "seed") {
            const double s = number_or_throw(value, "config seed");
            if (s < 0 || s != std::floor(s)) throw UsageError("config: seed must be a non-negative integer");
            config.seed = std::stoull(value);
        } else if (key == "optimizer") {
            config.fit.optimizer = parse_optimizer(value);
        } else if (key == "tol") {
            config.fit.gradient_tol = number_or_throw(value, "config tol");
        } else if (key == "max_iter") {
            config.fit.max_iter = static_cast<int>(parse_size_list(value).at(0));
        } else if (key == "threads") {
            config.threads = parse_size_list(value).at(0);
        } else if (key == "svg") {
            if (value == "true" || value == "1" || value == "yes") {
                svg = true;
            } else if (value == "false" || value == "0" || value == "no") {
                svg = false;
            } else {
                throw UsageError("config: svg must be true or false");
            }
        } else {
            throw UsageError("config: unknown key '" + key + "'");
        }
    }
    return svg;
}

Theta parse_theta(const std::string& text, const ModelSpec& spec) {
    Theta theta = spec.start_theta();
    std::vector<bool> seen(spec.num_free(), false);
    auto assign = [&](const std::string& label, double v) {
        auto idx = spec.free_index(label);
        if (!idx) throw UsageError("theta: model has no free parameter '" + label + "'");
        theta.values()[static_cast<Eigen::Index>(*idx)] = v;
        seen[*idx] = true;
    };

    const auto t = trim(text);
    if (!t.empty() && t[0] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(t);
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("theta: invalid JSON: ") + e.what());
        }
        if (!j.contains("theta") || !j["theta"].is_object()) throw UsageError("theta: JSON lacks a \"theta\" object");
        for (const auto& [label, value] : j["theta"].items()) {
            if (!value.is_number()) throw UsageError("theta: value of '" + label + "' is not a number");
            assign(label, value.get<double>());
        }
    } else {
        for (const auto& [label, value] : parse_key_values(text)) assign(label, number_or_throw(value, "theta " + label));
    }
    for (std::size_t j = 0; j < seen.size(); ++j) {
        if (!seen[j]) throw UsageError("theta: no value for '" + spec.free_labels()[j] + "'");
    }
    return theta;
}

}  // namespace latent_rank::cli
