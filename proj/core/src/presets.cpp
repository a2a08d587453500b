#include "latent_rank/presets.hpp"

#include "latent_rank/dsl.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace latent_rank {

namespace {

constexpr const char* kSbMtmmHead = R"(# reduced-group split-ballot CTUM MTMM: 3 traits x 3 methods
T1 ~~ 1*T1
T2 ~~ 1*T2
T3 ~~ 1*T3
T1 ~~ r12*T2 + r13*T3
T2 ~~ r23*T3
M1 ~~ phi4*M1
M2 ~~ phi5*M2
M3 ~~ phi6*M3

group: 1
T1 =~ l11*y11 + l12*y12
T2 =~ l21*y21 + l22*y22
T3 =~ l31*y31 + l32*y32
M1 =~ 1*y11 + 1*y21 + 1*y31
M2 =~ 1*y12 + 1*y22 + 1*y32
y11 ~~ psi1*y11
y12 ~~ psi2*y12
y21 ~~ psi3*y21
y22 ~~ psi4*y22
y31 ~~ psi5*y31
y32 ~~ psi6*y32

group: 2
T1 =~ l11*y11 + l13*y13
T2 =~ l21*y21 + l23*y23
T3 =~ l31*y31 + l33*y33
M1 =~ 1*y11 + 1*y21 + 1*y31
M3 =~ 1*y13 + 1*y23 + 1*y33
)";

constexpr const char* kSbMtmmTable = R"(y11 ~~ psi1*y11
y13 ~~ psi2*y13
y21 ~~ psi3*y21
y23 ~~ psi7*y23
y31 ~~ psi8*y31
y33 ~~ psi9*y33
)";

constexpr const char* kSbMtmmPerVar = R"(y11 ~~ psi1*y11
y13 ~~ psi7*y13
y21 ~~ psi3*y21
y23 ~~ psi8*y23
y31 ~~ psi5*y31
y33 ~~ psi9*y33
)";

constexpr const char* kShapiro = R"(# y = Lambda eta, Lambda = [lambda | diag(psi)], no residual term
F =~ l1*y1 + l2*y2 + l3*y3
E1 =~ psi1*y1
E2 =~ psi2*y2
E3 =~ psi3*y3
F ~~ 1*F
E1 ~~ 1*E1
E2 ~~ 1*E2
E3 ~~ 1*E3
y1 ~~ 0*y1
y2 ~~ 0*y2
y3 ~~ 0*y3
)";

constexpr const char* kShapiroDirect = R"(F =~ l1*y1 + l2*y2 + l3*y3
F ~~ 1*F
y1 ~~ psi1*y1
y2 ~~ psi2*y2
y3 ~~ psi3*y3
)";

const std::vector<std::string>& sbmtmm_order() {
    static const std::vector<std::string> order{
        "l11",  "l21",  "l31",  "l12",  "l22",  "l32", "l13", "l23", "l33", "psi1", "psi2", "psi3",
        "psi4", "psi5", "psi6", "psi7", "psi8", "psi9", "r12", "r13", "r23", "phi4", "phi5", "phi6"};
    return order;
}

bool is_sbmtmm(const std::string& name) { return name == "sbmtmm" || name == "sbmtmm-pervar"; }
bool is_shapiro(const std::string& name) { return name == "shapiro" || name == "shapiro-direct"; }

void require_labels(const ModelSpec& spec, const std::vector<std::string>& labels, const char* what) {
    for (const auto& l : labels) {
        if (!spec.free_index(l)) {
            throw std::invalid_argument(std::string(what) + ": spec has no free parameter '" + l + "'");
        }
    }
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"sbmtmm", "sbmtmm-pervar", "appendix-mtmm", "shapiro", "shapiro-direct"};
}

bool has_preset(const std::string& name) {
    const auto names = preset_names();
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::string preset_text(const std::string& name) {
    if (name == "sbmtmm") return std::string(kSbMtmmHead) + kSbMtmmTable;
    if (name == "sbmtmm-pervar") return std::string(kSbMtmmHead) + kSbMtmmPerVar;
    if (name == "appendix-mtmm") return appendix_model_text(0.0);
    if (name == "shapiro") return kShapiro;
    if (name == "shapiro-direct") return kShapiroDirect;
    throw std::invalid_argument("unknown preset '" + name + "'");
}

std::size_t preset_groups(const std::string& name) {
    if (!has_preset(name)) throw std::invalid_argument("unknown preset '" + name + "'");
    return is_sbmtmm(name) ? 2 : 1;
}

ModelSpec preset(const std::string& name) {
    auto spec = parse_model_or_throw({preset_text(name), preset_groups(name)});
    if (is_sbmtmm(name)) return spec.with_free_order(sbmtmm_order());
    return spec;
}

std::string appendix_model_text(double d) {
    char lo[32];
    char hi[32];
    std::snprintf(lo, sizeof lo, "%.17g", 0.5 - d);
    std::snprintf(hi, sizeof hi, "%.17g", 0.5 + d);
    std::string text = R"(T1 =~ y1 + y2 + y3
T2 =~ y4 + y5 + y6
T3 =~ y7 + y8 + y9

M1 =~ 1*y1 + 1*y4 + 1*y7
M2 =~ 1*y2 + 1*y5 + 1*y8
M3 =~ 1*y3 + 1*y6 + 1*y9

M1 ~~ 0*M2 + 0*M3 + 0*T1 + 0*T2 + 0*T3
M2 ~~        0*M3 + 0*T1 + 0*T2 + 0*T3
M3 ~~               0*T1 + 0*T2 + 0*T3

)";
    text += std::string("T1 ~~ start(") + lo + ")*T2 + start(" + hi + ")*T3 + 1*T1\n";
    text += "T2 ~~ start(0.5)*T3 + 1*T2\nT3 ~~ 1*T3\n";
    return text;
}

Theta sbmtmm_theta(const ModelSpec& spec, const SbMtmmPoint& point) {
    require_labels(spec, sbmtmm_order(), "sbmtmm_theta");
    Theta theta = spec.start_theta();
    for (const auto& l : sbmtmm_order()) {
        if (l[0] == 'l') theta.set(l, point.lambda);
        if (l.rfind("psi", 0) == 0) theta.set(l, point.psi);
        if (l.rfind("phi", 0) == 0) theta.set(l, point.phi);
    }
    theta.set("r12", point.rho12);
    theta.set("r13", point.rho13);
    theta.set("r23", point.rho23);
    return theta;
}

Theta sbmtmm_population_theta(const ModelSpec& spec, double delta) {
    SbMtmmPoint p;
    p.rho12 = 0.5 - delta;
    p.rho13 = 0.5;
    p.rho23 = 0.5 + delta;
    return sbmtmm_theta(spec, p);
}

PodRoles sbmtmm_roles(const ModelSpec& spec) {
    require_labels(spec, sbmtmm_order(), "sbmtmm_roles");
    PodRoles roles;
    for (const auto& l : sbmtmm_order()) {
        if (l[0] == 'l') roles[l] = l.back() == '1' ? PodRole::LoadingMethod1 : PodRole::LoadingOther;
        if (l[0] == 'r') roles[l] = PodRole::TraitCorrelation;
        if (l.rfind("phi", 0) == 0) roles[l] = l == "phi4" ? PodRole::MethodVariance1 : PodRole::MethodVarianceOther;
    }
    // Residual roles follow the indicator each label is attached to (y_tm, method m).
    for (const auto& e : spec.entries()) {
        if (e.status != ParamStatus::Free || e.slot.matrix != MatrixTag::ResidualCov) continue;
        const auto& var = spec.groups()[e.slot.group].observed[e.slot.row];
        const bool method1 = !var.empty() && var.back() == '1';
        auto it = roles.find(e.label);
        if (it == roles.end() || it->second == PodRole::ResidualOther) {
            roles[e.label] = method1 ? PodRole::ResidualMethod1 : PodRole::ResidualOther;
        }
    }
    return roles;
}

Theta shapiro_population_theta(const ModelSpec& spec) {
    require_labels(spec, {"l1", "l2", "l3", "psi1", "psi2", "psi3"}, "shapiro_population_theta");
    // The squared parameterization carries psi as a loading on its own error factor.
    bool squared = false;
    for (const auto& e : spec.entries()) {
        if (e.label == "psi2" && e.slot.matrix == MatrixTag::Loading) squared = true;
    }
    Theta theta = spec.start_theta();
    theta.set("l1", 1.0);
    theta.set("l2", 0.4);
    theta.set("l3", 0.7);
    theta.set("psi1", 1.0);
    theta.set("psi2", squared ? 0.3 : 0.09);
    theta.set("psi3", 0.0);
    return theta;
}

std::optional<ThetaFamily> preset_family(const std::string& name) {
    if (is_sbmtmm(name)) {
        auto spec = preset(name);
        return ThetaFamily([spec](double d) { return sbmtmm_population_theta(spec, d); });
    }
    if (is_shapiro(name)) {
        auto spec = preset(name);
        return ThetaFamily([spec](double d) {
            auto theta = shapiro_population_theta(spec);
            theta.set("psi3", d);
            return theta;
        });
    }
    return std::nullopt;
}

}  // namespace latent_rank
