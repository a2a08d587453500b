#include "latent_rank/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace latent_rank {

namespace {

constexpr double kSymmetryTol = 1e-10;

std::size_t rows_of(const GroupLayout& g, MatrixTag tag) {
    return tag == MatrixTag::FactorCov ? g.latent.size() : g.observed.size();
}

std::size_t cols_of(const GroupLayout& g, MatrixTag tag) {
    return tag == MatrixTag::ResidualCov ? g.observed.size() : g.latent.size();
}

bool in_bounds(const std::vector<GroupLayout>& groups, const Slot& s) {
    if (s.group >= groups.size()) return false;
    const auto& g = groups[s.group];
    return s.row < rows_of(g, s.matrix) && s.col < cols_of(g, s.matrix);
}

Slot mirrored(const Slot& s) { return Slot{s.group, s.matrix, s.col, s.row}; }

}  // namespace

const char* to_string(MatrixTag tag) {
    switch (tag) {
        case MatrixTag::Loading: return "LOADING";
        case MatrixTag::FactorCov: return "FACTOR_COV";
        case MatrixTag::ResidualCov: return "RESIDUAL_COV";
    }
    return "?";
}

// ---------------------------------------------------------------- ModelSpec

ModelSpec::ModelSpec(std::vector<GroupLayout> groups, std::vector<ParameterEntry> entries)
    : groups_(std::move(groups)), entries_(std::move(entries)) {
    std::set<std::string> seen;
    for (const auto& e : entries_) {
        if (e.status == ParamStatus::Free && seen.insert(e.label).second) {
            free_labels_.push_back(e.label);
        }
    }
    index_entries();
}

ModelSpec::ModelSpec(std::vector<GroupLayout> groups, std::vector<ParameterEntry> entries,
                     std::vector<std::string> free_order)
    : ModelSpec(std::move(groups), std::move(entries)) {
    *this = with_free_order(std::move(free_order));
}

void ModelSpec::index_entries() {
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < free_labels_.size(); ++i) pos.emplace(free_labels_[i], i);
    entry_index_.assign(entries_.size(), -1);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].status != ParamStatus::Free) continue;
        entry_index_[i] = static_cast<std::ptrdiff_t>(pos.at(entries_[i].label));
    }
}

std::size_t ModelSpec::num_moments() const noexcept {
    std::size_t total = 0;
    for (const auto& g : groups_) total += vech_size(g.observed.size());
    return total;
}

std::size_t ModelSpec::moment_offset(std::size_t group) const {
    if (group > groups_.size()) throw std::out_of_range("group index out of range");
    std::size_t offset = 0;
    for (std::size_t g = 0; g < group; ++g) offset += vech_size(groups_[g].observed.size());
    return offset;
}

std::optional<std::size_t> ModelSpec::free_index(const std::string& label) const {
    auto it = std::find(free_labels_.begin(), free_labels_.end(), label);
    if (it == free_labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - free_labels_.begin());
}

std::optional<std::size_t> ModelSpec::entry_free_index(std::size_t i) const {
    const auto idx = entry_index_.at(i);
    if (idx < 0) return std::nullopt;
    return static_cast<std::size_t>(idx);
}

Theta ModelSpec::start_theta() const {
    Vector values = Vector::Zero(static_cast<Eigen::Index>(free_labels_.size()));
    std::vector<bool> set(free_labels_.size(), false);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto idx = entry_index_[i];
        if (idx < 0 || set[static_cast<std::size_t>(idx)]) continue;
        values[idx] = entries_[i].value;
        set[static_cast<std::size_t>(idx)] = true;
    }
    return Theta(std::move(values), free_labels_);
}

ModelSpec ModelSpec::with_free_order(std::vector<std::string> order) const {
    auto sorted_a = order;
    auto sorted_b = free_labels_;
    std::sort(sorted_a.begin(), sorted_a.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    if (sorted_a != sorted_b) {
        throw std::invalid_argument("free-parameter order is not a permutation of the free labels");
    }
    ModelSpec out = *this;
    out.free_labels_ = std::move(order);
    out.index_entries();
    return out;
}

ModelSpec ModelSpec::with_start(const Theta& theta) const {
    theta.check_conforms(*this);
    ModelSpec out = *this;
    for (std::size_t i = 0; i < out.entries_.size(); ++i) {
        const auto idx = entry_index_[i];
        if (idx >= 0) out.entries_[i].value = theta.values()[idx];
    }
    return out;
}

std::vector<std::string> ModelSpec::moment_labels() const {
    std::vector<std::string> labels;
    labels.reserve(num_moments());
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        const auto& obs = groups_[g].observed;
        for (std::size_t c = 0; c < obs.size(); ++c) {
            for (std::size_t r = c; r < obs.size(); ++r) {
                labels.push_back("g" + std::to_string(g + 1) + ":" + obs[r] + "~~" + obs[c]);
            }
        }
    }
    return labels;
}

std::string ModelSpec::describe(const Slot& slot) const {
    std::ostringstream os;
    os << "g" << slot.group + 1 << ' ';
    if (slot.group >= groups_.size() || !in_bounds(groups_, slot)) {
        os << to_string(slot.matrix) << '[' << slot.row << ',' << slot.col << ']';
        return os.str();
    }
    const auto& g = groups_[slot.group];
    switch (slot.matrix) {
        case MatrixTag::Loading:
            os << "lambda[" << g.observed[slot.row] << ',' << g.latent[slot.col] << ']';
            break;
        case MatrixTag::FactorCov:
            os << "phi[" << g.latent[slot.row] << ',' << g.latent[slot.col] << ']';
            break;
        case MatrixTag::ResidualCov:
            os << "psi[" << g.observed[slot.row] << ',' << g.observed[slot.col] << ']';
            break;
    }
    return os.str();
}

// -------------------------------------------------------------------- Theta

Theta::Theta(Vector values, std::vector<std::string> labels)
    : values_(std::move(values)), labels_(std::move(labels)) {
    if (static_cast<std::size_t>(values_.size()) != labels_.size()) {
        throw std::invalid_argument("theta values and labels differ in length");
    }
}

Theta::Theta(const ModelSpec& spec, Vector values) : Theta(std::move(values), spec.free_labels()) {}

double Theta::at(const std::string& label) const {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) return values_[static_cast<Eigen::Index>(i)];
    }
    throw std::out_of_range("unknown parameter label: " + label);
}

void Theta::set(const std::string& label, double value) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] == label) {
            values_[static_cast<Eigen::Index>(i)] = value;
            return;
        }
    }
    throw std::out_of_range("unknown parameter label: " + label);
}

void Theta::check_conforms(const ModelSpec& spec) const {
    if (labels_.size() != spec.num_free()) {
        throw std::invalid_argument("theta has " + std::to_string(labels_.size()) +
                                    " entries but the model has " +
                                    std::to_string(spec.num_free()) + " free parameters");
    }
    if (labels_ != spec.free_labels()) {
        throw std::invalid_argument("theta label order does not match the model's free-parameter order");
    }
}

// ------------------------------------------------------------- MomentVector

MomentVector::MomentVector(Vector values, std::vector<std::size_t> group_sizes)
    : values_(std::move(values)), sizes_(std::move(group_sizes)) {
    std::size_t offset = 0;
    for (auto s : sizes_) {
        offsets_.push_back(offset);
        offset += s;
    }
    if (offset != static_cast<std::size_t>(values_.size())) {
        throw std::invalid_argument("moment vector length does not match its group segments");
    }
}

// ------------------------------------------------------------ SampleMoments

MomentVector SampleMoments::moments() const {
    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    for (const auto& s : covariances) {
        sizes.push_back(vech_size(static_cast<std::size_t>(s.rows())));
        total += sizes.back();
    }
    Vector v(static_cast<Eigen::Index>(total));
    Eigen::Index at = 0;
    for (const auto& s : covariances) {
        Vector seg = vech(s);
        v.segment(at, seg.size()) = seg;
        at += seg.size();
    }
    return MomentVector(std::move(v), std::move(sizes));
}

std::vector<double> SampleMoments::group_weights() const {
    const double n = total_n();
    std::vector<double> w;
    w.reserve(sample_sizes.size());
    for (double ng : sample_sizes) w.push_back(ng / n);
    return w;
}

double SampleMoments::total_n() const {
    double n = 0.0;
    for (double ng : sample_sizes) n += ng;
    return n;
}

void SampleMoments::check(const ModelSpec& spec) const {
    if (covariances.size() != spec.num_groups() || sample_sizes.size() != spec.num_groups()) {
        throw std::invalid_argument("sample moments have " + std::to_string(covariances.size()) +
                                    " groups but the model has " + std::to_string(spec.num_groups()));
    }
    for (std::size_t g = 0; g < covariances.size(); ++g) {
        const auto& s = covariances[g];
        const auto q = spec.num_observed(g);
        if (static_cast<std::size_t>(s.rows()) != q || static_cast<std::size_t>(s.cols()) != q) {
            throw std::invalid_argument("group " + std::to_string(g + 1) + " covariance is " +
                                        std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                                        ", expected " + std::to_string(q) + "x" + std::to_string(q));
        }
        if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8) {
            throw std::invalid_argument("group " + std::to_string(g + 1) + " covariance is not symmetric");
        }
        if (sample_sizes[g] < static_cast<double>(q + 1)) {
            throw std::invalid_argument("group " + std::to_string(g + 1) + " sample size " +
                                        std::to_string(sample_sizes[g]) + " is below q + 1");
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
        const double smallest = eig.eigenvalues()[0];
        if (!(smallest > 0.0)) {
            throw NotPositiveDefinite("group " + std::to_string(g + 1) +
                                          " covariance is not positive-definite (smallest eigenvalue " +
                                          std::to_string(smallest) + ")",
                                      smallest);
        }
    }
}

// ------------------------------------------------------------ Model algebra

std::vector<GroupMatrices> build_matrices(const ModelSpec& spec, const Theta& theta) {
    theta.check_conforms(spec);
    std::vector<GroupMatrices> out;
    out.reserve(spec.num_groups());
    for (const auto& g : spec.groups()) {
        const auto q = static_cast<Eigen::Index>(g.observed.size());
        const auto k = static_cast<Eigen::Index>(g.latent.size());
        out.push_back({Matrix::Zero(q, k), Matrix::Zero(k, k), Matrix::Zero(q, q)});
    }
    const auto& entries = spec.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (!in_bounds(spec.groups(), e.slot)) {
            throw std::invalid_argument("slot out of range: " + spec.describe(e.slot));
        }
        const auto idx = spec.entry_free_index(i);
        const double v = idx ? theta.values()[static_cast<Eigen::Index>(*idx)] : e.value;
        auto& m = out[e.slot.group];
        const auto r = static_cast<Eigen::Index>(e.slot.row);
        const auto c = static_cast<Eigen::Index>(e.slot.col);
        switch (e.slot.matrix) {
            case MatrixTag::Loading: m.loadings(r, c) = v; break;
            case MatrixTag::FactorCov: m.factor_cov(r, c) = v; break;
            case MatrixTag::ResidualCov: m.residual_cov(r, c) = v; break;
        }
    }
    return out;
}

MomentVector implied_sigma(const ModelSpec& spec, const Theta& theta) {
    const auto mats = build_matrices(spec, theta);
    std::vector<std::size_t> sizes;
    Vector v(static_cast<Eigen::Index>(spec.num_moments()));
    Eigen::Index at = 0;
    for (const auto& m : mats) {
        Vector seg = vech_lower(m.implied());
        v.segment(at, seg.size()) = seg;
        at += seg.size();
        sizes.push_back(static_cast<std::size_t>(seg.size()));
    }
    return MomentVector(std::move(v), std::move(sizes));
}

Vector vech_lower(const Matrix& m) {
    const auto q = m.rows();
    Vector v(q * (q + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < q; ++c) {
        for (Eigen::Index r = c; r < q; ++r) v[k++] = m(r, c);
    }
    return v;
}

Vector vech(const Matrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("vech requires a square matrix");
    if (m.size() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
        throw std::invalid_argument("vech requires a symmetric matrix");
    }
    return vech_lower(m);
}

Matrix unvech(const Vector& v, std::size_t q) {
    if (static_cast<std::size_t>(v.size()) != vech_size(q)) {
        throw std::invalid_argument("unvech: length does not match dimension");
    }
    const auto n = static_cast<Eigen::Index>(q);
    Matrix m(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = c; r < n; ++r) {
            m(r, c) = v[k];
            m(c, r) = v[k];
            ++k;
        }
    }
    return m;
}

Matrix duplication_matrix(std::size_t q) {
    if (q == 0) throw std::invalid_argument("duplication_matrix requires q >= 1");
    const auto n = static_cast<Eigen::Index>(q);
    Matrix d = Matrix::Zero(n * n, n * (n + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = c; r < n; ++r) {
            // vec is column-major: element (r, c) sits at c * q + r
            d(c * n + r, k) = 1.0;
            d(r * n + c, k) = 1.0;
            ++k;
        }
    }
    return d;
}

// --------------------------------------------------------------- Validation

std::vector<Violation> validate(const ModelSpec& spec) {
    std::vector<Violation> out;
    const auto& groups = spec.groups();
    const auto& entries = spec.entries();

    if (groups.empty()) {
        out.push_back({ViolationKind::Group, std::nullopt, "model has no groups"});
    }

    std::map<Slot, std::size_t> by_slot;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        if (e.slot.group >= groups.size()) {
            out.push_back({ViolationKind::Group, e.slot,
                           "entry '" + e.label + "' refers to group " + std::to_string(e.slot.group + 1) +
                               " but the model has " + std::to_string(groups.size())});
            continue;
        }
        if (!in_bounds(groups, e.slot)) {
            const auto& g = groups[e.slot.group];
            out.push_back({ViolationKind::Dimension, e.slot,
                           "entry '" + e.label + "' at " + std::string(to_string(e.slot.matrix)) + "[" +
                               std::to_string(e.slot.row) + "," + std::to_string(e.slot.col) +
                               "] exceeds the " + std::to_string(rows_of(g, e.slot.matrix)) + "x" +
                               std::to_string(cols_of(g, e.slot.matrix)) + " matrix of group " +
                               std::to_string(e.slot.group + 1)});
            continue;
        }
        if (!by_slot.emplace(e.slot, i).second) {
            out.push_back({ViolationKind::DuplicateSlot, e.slot,
                           "slot " + spec.describe(e.slot) + " is specified more than once"});
        }
    }

    for (const auto& [slot, i] : by_slot) {
        if (slot.matrix == MatrixTag::Loading || slot.row == slot.col) continue;
        const auto& e = entries[i];
        auto it = by_slot.find(mirrored(slot));
        if (it == by_slot.end()) {
            out.push_back({ViolationKind::Symmetry, slot,
                           "slot " + spec.describe(slot) + " has no mirrored entry"});
            continue;
        }
        const auto& m = entries[it->second];
        const bool same = m.status == e.status &&
                          (e.status == ParamStatus::Free ? m.label == e.label : m.value == e.value);
        if (!same) {
            out.push_back({ViolationKind::Symmetry, slot,
                           "slot " + spec.describe(slot) + " and its mirror disagree"});
        }
    }

    struct LabelInfo {
        ParamStatus status;
        double value;
    };
    std::map<std::string, LabelInfo> labels;
    for (const auto& e : entries) {
        auto [it, inserted] = labels.emplace(e.label, LabelInfo{e.status, e.value});
        if (inserted) continue;
        if (it->second.status != e.status) {
            out.push_back({ViolationKind::SharedLabel, e.slot,
                           "label '" + e.label + "' is both FREE and FIXED (at " +
                               spec.describe(e.slot) + ")"});
        } else if (e.status == ParamStatus::Free && it->second.value != e.value) {
            out.push_back({ViolationKind::SharedLabel, e.slot,
                           "label '" + e.label + "' has conflicting start values at " +
                               spec.describe(e.slot)});
        }
    }
    return out;
}

bool equivalent(const ModelSpec& a, const ModelSpec& b) {
    if (a.num_groups() != b.num_groups()) return false;
    for (std::size_t g = 0; g < a.num_groups(); ++g) {
        if (a.groups()[g].observed != b.groups()[g].observed) return false;
        if (a.groups()[g].latent != b.groups()[g].latent) return false;
    }
    auto table = [](const ModelSpec& s) {
        std::map<Slot, const ParameterEntry*> t;
        for (const auto& e : s.entries()) {
            if (e.status == ParamStatus::Fixed && e.value == 0.0) continue;
            t.emplace(e.slot, &e);
        }
        return t;
    };
    const auto ta = table(a);
    const auto tb = table(b);
    if (ta.size() != tb.size()) return false;

    std::map<std::string, std::string> a_to_b;
    std::map<std::string, std::string> b_to_a;
    for (const auto& [slot, ea] : ta) {
        auto it = tb.find(slot);
        if (it == tb.end()) return false;
        const auto* eb = it->second;
        if (ea->status != eb->status || ea->value != eb->value) return false;
        if (ea->status == ParamStatus::Fixed) continue;
        auto [ia, new_a] = a_to_b.emplace(ea->label, eb->label);
        auto [ib, new_b] = b_to_a.emplace(eb->label, ea->label);
        if (ia->second != eb->label || ib->second != ea->label) return false;
    }
    return true;
}

}  // namespace latent_rank
