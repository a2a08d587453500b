#include "latent_rank/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

namespace latent_rank {

namespace {

// ------------------------------------------------------------------ lexing

enum class Tok { Ident, Number, By, Cov, Star, Plus, LParen, RParen, Colon, End, Eof };

struct Token {
    Tok kind;
    std::string text;
    double number = 0.0;
    std::size_t pos = 0;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }

class Diagnostics {
public:
    explicit Diagnostics(const std::string& text) : text_(text) {}

    void error(std::size_t pos, std::string msg) { add(pos, std::move(msg), Severity::Error); }
    void warning(std::size_t pos, std::string msg) { add(pos, std::move(msg), Severity::Warning); }

    [[nodiscard]] bool has_errors() const {
        return std::any_of(list_.begin(), list_.end(),
                           [](const ParseDiagnostic& d) { return d.severity == Severity::Error; });
    }
    std::vector<ParseDiagnostic> take() { return std::move(list_); }

private:
    void add(std::size_t pos, std::string msg, Severity sev) {
        if (!text_.empty() && pos >= text_.size()) pos = text_.size() - 1;
        ParseDiagnostic d;
        d.offset = pos;
        d.message = std::move(msg);
        d.severity = sev;
        for (std::size_t i = 0; i < pos && i < text_.size(); ++i) {
            if (text_[i] == '\n') {
                ++d.line;
                d.column = 1;
            } else {
                ++d.column;
            }
        }
        list_.push_back(std::move(d));
    }

    const std::string& text_;
    std::vector<ParseDiagnostic> list_;
};

std::vector<Token> lex(const std::string& text, Diagnostics& diag) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const char c = text[i];
        if (c == '#') {
            while (i < n && text[i] != '\n') ++i;
            continue;
        }
        if (c == '\n' || c == ';') {
            out.push_back({Tok::End, std::string(1, c), 0.0, i});
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '=' && i + 1 < n && text[i + 1] == '~') {
            out.push_back({Tok::By, "=~", 0.0, i});
            i += 2;
            continue;
        }
        if (c == '~' && i + 1 < n && text[i + 1] == '~') {
            out.push_back({Tok::Cov, "~~", 0.0, i});
            i += 2;
            continue;
        }
        const bool signed_number = c == '-' && i + 1 < n &&
                                   (std::isdigit(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '.');
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || signed_number) {
            const std::size_t start = i;
            if (signed_number) ++i;
            while (i < n) {
                const char d = text[i];
                if (std::isalnum(static_cast<unsigned char>(d)) || d == '.') {
                    ++i;
                } else if ((d == '+' || d == '-') && (text[i - 1] == 'e' || text[i - 1] == 'E') &&
                           i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
                    ++i;
                } else {
                    break;
                }
            }
            std::string lexeme = text.substr(start, i - start);
            double value = 0.0;
            const char* first = lexeme.data();
            const char* last = lexeme.data() + lexeme.size();
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc() || ptr != last) {
                diag.error(start, "malformed numeric literal '" + lexeme + "'");
            }
            out.push_back({Tok::Number, std::move(lexeme), value, start});
            continue;
        }
        if (ident_start(c)) {
            const std::size_t start = i;
            while (i < n && ident_char(text[i])) ++i;
            out.push_back({Tok::Ident, text.substr(start, i - start), 0.0, start});
            continue;
        }
        switch (c) {
            case '*': out.push_back({Tok::Star, "*", 0.0, i}); break;
            case '+': out.push_back({Tok::Plus, "+", 0.0, i}); break;
            case '(': out.push_back({Tok::LParen, "(", 0.0, i}); break;
            case ')': out.push_back({Tok::RParen, ")", 0.0, i}); break;
            case ':': out.push_back({Tok::Colon, ":", 0.0, i}); break;
            default: diag.error(i, std::string("unexpected character '") + c + "'"); break;
        }
        ++i;
    }
    out.push_back({Tok::Eof, "", 0.0, n == 0 ? 0 : n - 1});
    return out;
}

// ----------------------------------------------------------------- parsing

enum class Op { By, Cov };

struct Term {
    std::optional<double> fixed;
    std::optional<std::string> label;
    std::optional<double> start;
    std::string var;
    std::size_t pos = 0;
};

struct Statement {
    Op op = Op::By;
    std::string lhs;
    std::size_t lhs_pos = 0;
    std::vector<Term> terms;
    std::optional<std::size_t> group;  // zero-based; nullopt = every group
};

class Parser {
public:
    Parser(std::vector<Token> toks, std::size_t groups, Diagnostics& diag)
        : toks_(std::move(toks)), groups_(groups), diag_(diag) {}

    std::vector<Statement> parse() {
        std::vector<Statement> out;
        while (peek().kind != Tok::Eof) {
            if (peek().kind == Tok::End) {
                ++at_;
                continue;
            }
            if (!statement(out)) skip_to_end();
        }
        return out;
    }

private:
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(at_ + k, toks_.size() - 1)]; }
    const Token& next() {
        const Token& t = toks_[at_];
        if (at_ + 1 < toks_.size()) ++at_;
        return t;
    }
    void skip_to_end() {
        while (peek().kind != Tok::End && peek().kind != Tok::Eof) ++at_;
    }
    bool at_end() const { return peek().kind == Tok::End || peek().kind == Tok::Eof; }

    bool statement(std::vector<Statement>& out) {
        if (peek().kind == Tok::Ident && peek().text == "group" && peek(1).kind == Tok::Colon) {
            next();
            next();
            const Token& num = peek();
            if (num.kind != Tok::Number || num.number != static_cast<double>(static_cast<long>(num.number)) ||
                num.number < 1) {
                diag_.error(num.pos, "expected a positive group number after 'group:'");
                return false;
            }
            if (num.number > static_cast<double>(groups_)) {
                diag_.error(num.pos, "group " + num.text + " exceeds the declared group count " +
                                         std::to_string(groups_));
                return false;
            }
            current_group_ = static_cast<std::size_t>(num.number) - 1;
            next();
            if (!at_end()) {
                diag_.error(peek().pos, "unexpected '" + peek().text + "' after group header");
                return false;
            }
            return true;
        }

        Statement st;
        st.group = current_group_;
        if (peek().kind != Tok::Ident) {
            diag_.error(peek().pos, "expected a variable name at the start of a statement");
            return false;
        }
        st.lhs = next().text;
        st.lhs_pos = toks_[at_ - 1].pos;
        if (peek().kind == Tok::By) {
            st.op = Op::By;
        } else if (peek().kind == Tok::Cov) {
            st.op = Op::Cov;
        } else {
            diag_.error(peek().pos, "expected '=~' or '~~' after '" + st.lhs + "'");
            return false;
        }
        next();
        for (;;) {
            Term t;
            if (!term(t)) return false;
            st.terms.push_back(std::move(t));
            if (peek().kind == Tok::Plus) {
                next();
                continue;
            }
            if (at_end()) break;
            diag_.error(peek().pos, "expected '+' or end of statement, found '" + peek().text + "'");
            return false;
        }
        out.push_back(std::move(st));
        return true;
    }

    bool term(Term& t) {
        t.pos = peek().pos;
        for (;;) {
            const Token& tok = peek();
            if (tok.kind == Tok::Number) {
                next();
                if (peek().kind != Tok::Star) {
                    diag_.error(peek().pos, "expected '*' after numeric modifier");
                    return false;
                }
                next();
                if (t.fixed || t.label || t.start) {
                    diag_.error(tok.pos, "a fixed value cannot be combined with another modifier");
                    return false;
                }
                t.fixed = tok.number;
                continue;
            }
            if (tok.kind == Tok::Ident && tok.text == "start" && peek(1).kind == Tok::LParen) {
                next();
                next();
                const Token& num = peek();
                if (num.kind != Tok::Number) {
                    diag_.error(num.pos, "expected a number inside start()");
                    return false;
                }
                next();
                if (peek().kind != Tok::RParen) {
                    diag_.error(peek().pos, "expected ')' to close start(");
                    return false;
                }
                next();
                if (peek().kind != Tok::Star) {
                    diag_.error(peek().pos, "expected '*' after start(...)");
                    return false;
                }
                next();
                if (t.fixed || t.start) {
                    diag_.error(tok.pos, "start() cannot be combined with a fixed value or another start()");
                    return false;
                }
                t.start = num.number;
                continue;
            }
            if (tok.kind == Tok::Ident) {
                next();
                if (peek().kind == Tok::Star) {
                    next();
                    if (t.fixed || t.label) {
                        diag_.error(tok.pos, "label '" + tok.text +
                                                 "' cannot be combined with a fixed value or another label");
                        return false;
                    }
                    t.label = tok.text;
                    continue;
                }
                t.var = tok.text;
                t.pos = tok.pos;
                return true;
            }
            diag_.error(tok.pos, tok.kind == Tok::End || tok.kind == Tok::Eof
                                     ? std::string("expected a variable name")
                                     : "expected a variable name, found '" + tok.text + "'");
            return false;
        }
    }

    std::vector<Token> toks_;
    std::size_t at_ = 0;
    std::size_t groups_;
    Diagnostics& diag_;
    std::optional<std::size_t> current_group_;
};

// ---------------------------------------------------------------- semantics

struct SlotKey {
    std::size_t group;
    MatrixTag tag;
    std::size_t a;
    std::size_t b;
    auto operator<=>(const SlotKey&) const = default;
};

struct Placed {
    std::size_t entry;  // index of the (first) entry
    std::size_t pos;
    bool explicit_label;
};

class Builder {
public:
    Builder(const std::vector<Statement>& sts, std::size_t groups, Diagnostics& diag)
        : sts_(sts), groups_(groups), diag_(diag), layouts_(groups), member_(groups) {}

    std::optional<ModelSpec> build() {
        declare();
        if (diag_.has_errors()) return std::nullopt;
        membership();
        if (diag_.has_errors()) return std::nullopt;
        order();
        place();
        if (diag_.has_errors()) return std::nullopt;
        auto_variances();
        resolve_starts();
        if (diag_.has_errors()) return std::nullopt;
        warn_empty_latents();

        ModelSpec spec(layouts_, entries_);
        for (const auto& v : validate(spec)) diag_.error(0, "invalid model: " + v.message);
        if (diag_.has_errors()) return std::nullopt;
        return spec;
    }

private:
    bool is_latent(const std::string& name) const { return latents_.count(name) > 0; }
    bool known(const std::string& name) const { return is_latent(name) || observed_.count(name) > 0; }

    void declare() {
        for (const auto& st : sts_) {
            if (st.op == Op::By) latents_.insert(st.lhs);
        }
        for (const auto& st : sts_) {
            if (st.op == Op::By) {
                for (const auto& t : st.terms) {
                    if (is_latent(t.var)) {
                        diag_.error(t.pos, "'" + t.var + "' is a latent variable; higher-order factors are not supported");
                    } else {
                        observed_.insert(t.var);
                    }
                }
            } else {
                // a variance statement on a non-latent name declares an observed variable
                for (const auto& t : st.terms) {
                    if (t.var == st.lhs && !is_latent(st.lhs)) observed_.insert(st.lhs);
                }
            }
        }
        for (const auto& st : sts_) {
            if (st.op != Op::Cov) continue;
            if (!known(st.lhs)) diag_.error(st.lhs_pos, "unknown variable '" + st.lhs + "'");
            for (const auto& t : st.terms) {
                if (!known(t.var)) {
                    diag_.error(t.pos, "unknown variable '" + t.var + "'");
                } else if (known(st.lhs) && is_latent(st.lhs) != is_latent(t.var)) {
                    diag_.error(t.pos, "covariance between latent and observed variables ('" + st.lhs + "', '" +
                                           t.var + "') is not supported");
                }
            }
        }
    }

    void membership() {
        for (const auto& st : sts_) {
            for (std::size_t g = 0; g < groups_; ++g) {
                if (st.group && *st.group != g) continue;
                if (st.op == Op::By) {
                    member_[g].insert(st.lhs);
                    for (const auto& t : st.terms) member_[g].insert(t.var);
                } else if (st.group) {
                    member_[g].insert(st.lhs);
                    for (const auto& t : st.terms) member_[g].insert(t.var);
                }
            }
        }
        // names mentioned only in group-wide (co)variance statements live in every group
        std::set<std::string> anywhere;
        for (const auto& m : member_) anywhere.insert(m.begin(), m.end());
        for (const auto& st : sts_) {
            if (st.op != Op::Cov || st.group) continue;
            std::vector<std::string> names{st.lhs};
            for (const auto& t : st.terms) names.push_back(t.var);
            for (const auto& name : names) {
                if (anywhere.count(name)) continue;
                for (auto& m : member_) m.insert(name);
            }
        }
    }

    void order() {
        std::vector<std::set<std::string>> placed(groups_);
        auto note = [&](std::size_t g, const std::string& name) {
            if (!member_[g].count(name) || !placed[g].insert(name).second) return;
            (is_latent(name) ? layouts_[g].latent : layouts_[g].observed).push_back(name);
        };
        for (const auto& st : sts_) {
            for (std::size_t g = 0; g < groups_; ++g) {
                if (st.group && *st.group != g) continue;
                note(g, st.lhs);
                for (const auto& t : st.terms) note(g, t.var);
            }
        }
        for (std::size_t g = 0; g < groups_; ++g) {
            for (std::size_t i = 0; i < layouts_[g].observed.size(); ++i) obs_index_[g][layouts_[g].observed[i]] = i;
            for (std::size_t i = 0; i < layouts_[g].latent.size(); ++i) lat_index_[g][layouts_[g].latent[i]] = i;
        }
    }

    std::string auto_label(const Statement& st, const Term& t) const {
        std::string label = st.lhs + (st.op == Op::By ? "=~" : "~~") + t.var;
        if (st.group && groups_ > 1) label += ".g" + std::to_string(*st.group + 1);
        return label;
    }

    void add(const SlotKey& key, ParameterEntry e, std::size_t pos, bool explicit_label,
             std::optional<double> explicit_start) {
        auto it = placed_.find(key);
        if (it != placed_.end()) {
            const auto& prev = entries_[it->second.entry];
            const bool same = prev.status == e.status &&
                              (e.status == ParamStatus::Fixed ? prev.value == e.value
                                                              : (prev.label == e.label || !explicit_label));
            if (same) {
                diag_.warning(pos, "duplicate specification of " + describe(key) + " ignored");
            } else {
                diag_.error(pos, "conflicting specification of " + describe(key));
            }
            return;
        }
        if (e.status == ParamStatus::Free && explicit_start) {
            auto [st, inserted] = starts_.emplace(e.label, std::make_pair(*explicit_start, pos));
            if (!inserted && st->second.first != *explicit_start) {
                diag_.error(pos, "conflicting start values for parameter '" + e.label + "'");
            }
        }
        placed_.emplace(key, Placed{entries_.size(), pos, explicit_label});
        const bool off_diag = key.tag != MatrixTag::Loading && key.a != key.b;
        e.slot = Slot{key.group, key.tag, key.a, key.b};
        entries_.push_back(e);
        if (off_diag) {
            e.slot = Slot{key.group, key.tag, key.b, key.a};
            entries_.push_back(e);
        }
    }

    std::string describe(const SlotKey& k) const {
        const auto& g = layouts_[k.group];
        std::string s = "group " + std::to_string(k.group + 1) + " ";
        switch (k.tag) {
            case MatrixTag::Loading: return s + g.latent[k.b] + " =~ " + g.observed[k.a];
            case MatrixTag::FactorCov: return s + g.latent[k.a] + " ~~ " + g.latent[k.b];
            case MatrixTag::ResidualCov: return s + g.observed[k.a] + " ~~ " + g.observed[k.b];
        }
        return s;
    }

    void place() {
        for (const auto& st : sts_) {
            for (const auto& t : st.terms) {
                bool applied = false;
                for (std::size_t g = 0; g < groups_; ++g) {
                    if (st.group && *st.group != g) continue;
                    if (!member_[g].count(st.lhs) || !member_[g].count(t.var)) continue;
                    applied = true;

                    SlotKey key{g, MatrixTag::Loading, 0, 0};
                    double default_start = kDefaultLoadingStart;
                    if (st.op == Op::By) {
                        key.a = obs_index_[g].at(t.var);
                        key.b = lat_index_[g].at(st.lhs);
                    } else {
                        const bool latent = is_latent(st.lhs);
                        auto& index = latent ? lat_index_[g] : obs_index_[g];
                        key.tag = latent ? MatrixTag::FactorCov : MatrixTag::ResidualCov;
                        const auto i = index.at(st.lhs);
                        const auto j = index.at(t.var);
                        key.a = std::max(i, j);
                        key.b = std::min(i, j);
                        default_start = i == j ? kDefaultVarianceStart : kDefaultCovarianceStart;
                    }
                    ParameterEntry e;
                    e.label = t.label.value_or(auto_label(st, t));
                    if (t.fixed) {
                        e.status = ParamStatus::Fixed;
                        e.value = *t.fixed;
                    } else {
                        e.status = ParamStatus::Free;
                        e.value = t.start.value_or(default_start);
                    }
                    add(key, std::move(e), t.pos, t.label.has_value(), t.start);
                }
                if (!applied) {
                    if (st.group) {
                        diag_.error(t.pos, "'" + st.lhs + "' and '" + t.var + "' are not both present in group " +
                                               std::to_string(*st.group + 1));
                    } else {
                        diag_.error(t.pos, "'" + st.lhs + "' and '" + t.var + "' never appear in the same group");
                    }
                }
            }
        }
    }

    void auto_variances() {
        for (std::size_t g = 0; g < groups_; ++g) {
            for (std::size_t i = 0; i < layouts_[g].observed.size(); ++i) {
                const SlotKey key{g, MatrixTag::ResidualCov, i, i};
                if (placed_.count(key)) continue;
                const auto& name = layouts_[g].observed[i];
                add(key, ParameterEntry{name + "~~" + name, {}, ParamStatus::Free, kDefaultVarianceStart}, 0, false,
                    std::nullopt);
            }
            for (std::size_t i = 0; i < layouts_[g].latent.size(); ++i) {
                const SlotKey key{g, MatrixTag::FactorCov, i, i};
                if (placed_.count(key)) continue;
                const auto& name = layouts_[g].latent[i];
                add(key, ParameterEntry{name + "~~" + name, {}, ParamStatus::Free, kDefaultVarianceStart}, 0, false,
                    std::nullopt);
            }
        }
    }

    void resolve_starts() {
        std::map<std::string, double> first_default;
        for (auto& e : entries_) {
            if (e.status != ParamStatus::Free) continue;
            if (auto it = starts_.find(e.label); it != starts_.end()) {
                e.value = it->second.first;
                continue;
            }
            auto [it, inserted] = first_default.emplace(e.label, e.value);
            e.value = it->second;
        }
        std::map<std::string, ParamStatus> status;
        for (const auto& [key, placed] : placed_) {
            const auto& e = entries_[placed.entry];
            auto [it, inserted] = status.emplace(e.label, e.status);
            if (!inserted && it->second != e.status) {
                diag_.error(placed.pos, "label '" + e.label + "' is used for both fixed and free parameters");
            }
        }
    }

    void warn_empty_latents() {
        for (std::size_t g = 0; g < groups_; ++g) {
            for (std::size_t j = 0; j < layouts_[g].latent.size(); ++j) {
                bool any = false;
                for (const auto& e : entries_) {
                    if (e.slot.group == g && e.slot.matrix == MatrixTag::Loading && e.slot.col == j) any = true;
                }
                if (!any) {
                    diag_.warning(0, "latent '" + layouts_[g].latent[j] + "' has no indicators in group " +
                                         std::to_string(g + 1));
                }
            }
        }
    }

    const std::vector<Statement>& sts_;
    std::size_t groups_;
    Diagnostics& diag_;
    std::set<std::string> latents_;
    std::set<std::string> observed_;
    std::vector<GroupLayout> layouts_;
    std::vector<std::set<std::string>> member_;
    std::map<std::size_t, std::unordered_map<std::string, std::size_t>> obs_index_;
    std::map<std::size_t, std::unordered_map<std::string, std::size_t>> lat_index_;
    std::map<SlotKey, Placed> placed_;
    std::map<std::string, std::pair<double, std::size_t>> starts_;
    std::vector<ParameterEntry> entries_;
};

// -------------------------------------------------------------- formatting

std::string number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

bool is_identifier(const std::string& s) {
    if (s.empty() || !ident_start(s[0])) return false;
    if (s == "start" || s == "group") return false;
    return std::all_of(s.begin(), s.end(), ident_char);
}

}  // namespace

std::string ParseResult::message() const {
    std::ostringstream os;
    for (const auto& d : diagnostics) {
        os << d.line << ':' << d.column << ": " << (d.severity == Severity::Error ? "error" : "warning") << ": "
           << d.message << '\n';
    }
    return os.str();
}

ParseResult parse_model(const ModelSource& src) {
    ParseResult res;
    Diagnostics diag(src.text);
    if (src.groups < 1) {
        diag.error(0, "group count must be at least 1");
        res.diagnostics = diag.take();
        return res;
    }
    if (src.text.find_first_not_of(" \t\r\n") == std::string::npos) {
        diag.error(0, "model text is empty");
        res.diagnostics = diag.take();
        return res;
    }
    auto tokens = lex(src.text, diag);
    Parser parser(std::move(tokens), src.groups, diag);
    const auto statements = parser.parse();
    if (!diag.has_errors()) {
        if (statements.empty()) {
            diag.error(0, "model contains no statements");
        } else {
            Builder builder(statements, src.groups, diag);
            res.spec = builder.build();
        }
    }
    if (diag.has_errors()) res.spec.reset();
    res.diagnostics = diag.take();
    return res;
}

ModelSpec parse_model_or_throw(const ModelSource& src) {
    auto res = parse_model(src);
    if (!res.ok()) throw std::invalid_argument("model parse failed:\n" + res.message());
    return std::move(*res.spec);
}

std::string format_spec(const ModelSpec& spec) {
    // Free labels are written explicitly; labels that are not identifiers get p<k> names.
    std::map<std::string, std::string> names;
    std::set<std::string> used;
    for (const auto& l : spec.free_labels()) {
        if (is_identifier(l)) used.insert(l);
    }
    int next = 1;
    for (const auto& l : spec.free_labels()) {
        if (is_identifier(l)) {
            names[l] = l;
            continue;
        }
        std::string candidate;
        do {
            candidate = "p" + std::to_string(next++);
        } while (used.count(candidate));
        used.insert(candidate);
        names[l] = candidate;
    }

    std::map<Slot, const ParameterEntry*> table;
    for (const auto& e : spec.entries()) table.emplace(e.slot, &e);

    auto modifier = [&](const ParameterEntry& e) {
        if (e.status == ParamStatus::Fixed) return number(e.value) + "*";
        return names.at(e.label) + "*start(" + number(e.value) + ")*";
    };

    std::ostringstream os;
    const bool multi = spec.num_groups() > 1;
    for (std::size_t g = 0; g < spec.num_groups(); ++g) {
        const auto& layout = spec.groups()[g];
        if (multi) os << "group: " << g + 1 << '\n';

        for (std::size_t i = 0; i < layout.observed.size(); ++i) {
            const auto& y = layout.observed[i];
            auto it = table.find(Slot{g, MatrixTag::ResidualCov, i, i});
            os << y << " ~~ " << (it == table.end() ? std::string("0*") : modifier(*it->second)) << y << '\n';
        }
        for (std::size_t j = 0; j < layout.latent.size(); ++j) {
            std::vector<std::string> terms;
            for (std::size_t i = 0; i < layout.observed.size(); ++i) {
                auto it = table.find(Slot{g, MatrixTag::Loading, i, j});
                if (it == table.end()) continue;
                const auto& e = *it->second;
                if (e.status == ParamStatus::Fixed && e.value == 0.0) continue;
                terms.push_back(modifier(e) + layout.observed[i]);
            }
            if (terms.empty() && !layout.observed.empty()) terms.push_back("0*" + layout.observed[0]);
            if (terms.empty()) continue;
            os << layout.latent[j] << " =~ ";
            for (std::size_t k = 0; k < terms.size(); ++k) os << (k ? " + " : "") << terms[k];
            os << '\n';
        }
        auto covariances = [&](MatrixTag tag, const std::vector<std::string>& vars, bool diagonal) {
            for (std::size_t c = 0; c < vars.size(); ++c) {
                for (std::size_t r = c; r < vars.size(); ++r) {
                    if ((r == c) != diagonal) continue;
                    auto it = table.find(Slot{g, tag, r, c});
                    if (it == table.end()) {
                        if (diagonal) os << vars[r] << " ~~ 0*" << vars[c] << '\n';
                        continue;
                    }
                    const auto& e = *it->second;
                    if (!diagonal && e.status == ParamStatus::Fixed && e.value == 0.0) continue;
                    os << vars[r] << " ~~ " << modifier(e) << vars[c] << '\n';
                }
            }
        };
        covariances(MatrixTag::FactorCov, layout.latent, true);
        covariances(MatrixTag::FactorCov, layout.latent, false);
        covariances(MatrixTag::ResidualCov, layout.observed, false);
    }
    return os.str();
}

}  // namespace latent_rank
