#include "kiml/symreg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace kiml::symreg {

using units::OperatorKind;
using units::Rational;
using units::UnitVector;

namespace {

bool representable(const UnitVector& u, int cap) {
    return u.max_denominator() <= Rational::kMaxDenominator && u.max_abs_exponent() <= cap;
}

// Vocabulary id -> token kind.
struct Vocab {
    int n_vars = 0;
    int constant = -1;
    std::vector<OperatorKind> ops;  // indexed by id - first_op
    int first_op = 0;

    explicit Vocab(const Grammar& g)
        : n_vars(static_cast<int>(g.variables.size())), constant(g.constant_token()), ops(g.operators),
          first_op(n_vars + (g.has_constants() ? 1 : 0)) {}
    [[nodiscard]] bool is_var(int t) const { return t >= 0 && t < n_vars; }
    [[nodiscard]] bool is_const(int t) const { return t >= 0 && t == constant; }
    [[nodiscard]] OperatorKind op(int t) const { return ops[static_cast<std::size_t>(t - first_op)]; }
};

}  // namespace

UnitTable::UnitTable(const Grammar& g) : cap_(g.priors.max_unit_exponent) {
    const int max_len = g.priors.max_length;
    std::vector<std::vector<UnitVector>> bucket(static_cast<std::size_t>(max_len) + 1);
    auto add = [&](const UnitVector& u, int len) {
        if (!representable(u, cap_)) return;
        if (min_len_.emplace(u, len).second) bucket[static_cast<std::size_t>(len)].push_back(u);
    };
    for (const auto& v : g.variables) add(v.unit, 1);
    std::vector<OperatorKind> unary;
    bool has_mul = false;
    bool has_div = false;
    for (auto op : g.operators) {
        if (units::arity(op) == 1) unary.push_back(op);
        has_mul |= op == OperatorKind::Mul;
        has_div |= op == OperatorKind::Div;
    }
    for (int len = 2; len <= max_len; ++len) {
        for (const auto& u : std::vector<UnitVector>(bucket[static_cast<std::size_t>(len - 1)])) {
            for (auto op : unary) {
                const UnitVector kids[1] = {u};
                if (auto out = units::try_propagate_units(op, kids)) add(*out, len);
            }
        }
        if (!has_mul && !has_div) continue;
        for (int a = 1; a <= len - 2; ++a) {
            const int b = len - 1 - a;
            const auto left = bucket[static_cast<std::size_t>(a)];
            const auto right = bucket[static_cast<std::size_t>(b)];
            for (const auto& u : left) {
                for (const auto& w : right) {
                    if (has_mul) add(u + w, len);
                    if (has_div) add(u - w, len);
                }
            }
        }
    }
}

int UnitTable::min_length(const UnitVector& u) const {
    const auto it = min_len_.find(u);
    return it == min_len_.end() ? kUnreachable : it->second;
}

bool UnitTable::within_cap(const UnitVector& u) const { return representable(u, cap_); }

SamplerState::SamplerState(const Grammar& g, const UnitTable& table) : g_(&g), table_(&table) {}

std::optional<SamplerState::Requirement> SamplerState::next_requirement(const std::vector<Frame>& frames) const {
    if (frames.empty()) {
        if (!tokens_.empty()) return std::nullopt;
        return Requirement{true, g_->target_unit};
    }
    const Frame& f = frames.back();
    const auto k = f.child_units.size();
    const Requirement free{};
    switch (f.op) {
        case OperatorKind::Add:
        case OperatorKind::Sub:
            if (k == 0) return f.req;
            return Requirement{true, f.child_units[0]};
        case OperatorKind::Mul:
            if (k == 0 || !f.req.fixed) return free;
            return Requirement{true, f.req.unit - f.child_units[0]};
        case OperatorKind::Div:
            if (k == 0 || !f.req.fixed) return free;
            return Requirement{true, f.child_units[0] - f.req.unit};
        case OperatorKind::Inv:
            if (!f.req.fixed) return free;
            return Requirement{true, -f.req.unit};
        case OperatorKind::Square:
            if (!f.req.fixed) return free;
            return Requirement{true, Rational(1, 2) * f.req.unit};
        case OperatorKind::Sqrt:
            if (!f.req.fixed) return free;
            return Requirement{true, Rational(2) * f.req.unit};
        default:
            return Requirement{true, UnitVector::dimensionless()};
    }
}

int SamplerState::lower_bound(const Requirement& r, int constants_left) const {
    if (!r.fixed) return 1;
    if (!table_->within_cap(r.unit)) return kUnreachable;
    const int no_const = table_->min_length(r.unit);
    return constants_left > 0 ? 1 : no_const;
}

int SamplerState::pending_lower_bound(const std::vector<Frame>& frames, int constants_left) const {
    int total = 0;
    for (const auto& f : frames) {
        const int remaining = f.arity - static_cast<int>(f.child_units.size()) - 1;
        if (remaining <= 0) continue;
        // Only a binary operator still on its first child gets here.
        if ((f.op == OperatorKind::Add || f.op == OperatorKind::Sub) && f.req.fixed)
            total += lower_bound(f.req, constants_left);
        else
            total += 1;
    }
    return total;
}

bool SamplerState::close_cascade(std::vector<Frame>& frames, UnitVector u, int token) const {
    while (!frames.empty()) {
        Frame& top = frames.back();
        top.child_units.push_back(u);
        top.child_tokens.push_back(token);
        if (static_cast<int>(top.child_units.size()) < top.arity) return true;
        auto out = units::try_propagate_units(top.op, top.child_units);
        if (!out || !table_->within_cap(*out)) return false;
        if (top.req.fixed && *out != top.req.unit) return false;
        u = *out;
        token = top.token;
        frames.pop_back();
    }
    return true;
}

bool SamplerState::check_token(int token, std::vector<Frame>* frames_out, UnitVector* const_unit) const {
    if (complete_ || token < 0 || token >= g_->vocabulary_size()) return false;
    const Vocab vocab(*g_);
    const auto& p = g_->priors;
    const auto req = next_requirement(frames_);
    if (!req) return false;
    std::vector<Frame> frames = frames_;
    int constants_used = static_cast<int>(constant_units_.size());

    if (vocab.is_var(token) || vocab.is_const(token)) {
        UnitVector u;
        if (vocab.is_var(token)) {
            u = g_->variables[static_cast<std::size_t>(token)].unit;
            if (req->fixed && u != req->unit) return false;
            if (!table_->within_cap(u)) return false;
        } else {
            if (constants_used >= p.max_constants) return false;
            u = req->fixed ? req->unit : UnitVector::dimensionless();
            if (!table_->within_cap(u)) return false;
            ++constants_used;
            if (const_unit) *const_unit = u;
        }
        if (!close_cascade(frames, u, token)) return false;
    } else {
        const OperatorKind op = vocab.op(token);
        if (op == OperatorKind::Log10 && log_count_ >= p.max_log10) return false;
        if (op == OperatorKind::Exp && exp_count_ >= p.max_exp) return false;
        if (units::is_trig(op) && trig_count_ >= p.max_trig) return false;
        if (p.no_double_inv && op == OperatorKind::Inv && !frames.empty() && frames.back().op == OperatorKind::Inv)
            return false;
        if (p.no_nested_trig && units::is_trig(op) &&
            std::any_of(frames.begin(), frames.end(), [](const Frame& f) { return units::is_trig(f.op); }))
            return false;
        if (req->fixed && units::is_transcendental(op) && !req->unit.is_dimensionless()) return false;
        Frame f;
        f.token = token;
        f.op = op;
        f.arity = units::arity(op);
        f.req = *req;
        frames.push_back(std::move(f));
    }

    const int new_len = length() + 1;
    if (frames.empty()) {
        if (new_len < p.min_length || new_len > p.max_length) return false;
    } else {
        const int left = p.max_constants - constants_used;
        const auto next = next_requirement(frames);
        const long need = static_cast<long>(lower_bound(*next, left)) + pending_lower_bound(frames, left);
        if (new_len + need > p.max_length) return false;
    }
    if (frames_out) *frames_out = std::move(frames);
    return true;
}

bool SamplerState::is_legal(int token) const { return check_token(token, nullptr, nullptr); }

std::vector<bool> SamplerState::legal_mask() const {
    std::vector<bool> mask(static_cast<std::size_t>(g_->vocabulary_size()));
    for (int t = 0; t < g_->vocabulary_size(); ++t) mask[static_cast<std::size_t>(t)] = is_legal(t);
    return mask;
}

void SamplerState::push(int token) {
    std::vector<Frame> frames;
    UnitVector cu;
    if (!check_token(token, &frames, &cu)) throw std::invalid_argument("SamplerState::push: illegal token");
    const Vocab vocab(*g_);
    if (vocab.is_const(token)) constant_units_.push_back(cu);
    if (!vocab.is_var(token) && !vocab.is_const(token)) {
        const OperatorKind op = vocab.op(token);
        log_count_ += op == OperatorKind::Log10;
        exp_count_ += op == OperatorKind::Exp;
        trig_count_ += units::is_trig(op);
    }
    tokens_.push_back(token);
    frames_ = std::move(frames);
    complete_ = frames_.empty();
}

bool SamplerState::is_terminal(int token) const {
    const Vocab vocab(*g_);
    return vocab.is_var(token) || vocab.is_const(token);
}

int SamplerState::parent_token() const { return frames_.empty() ? -1 : frames_.back().token; }

int SamplerState::sibling_token() const {
    if (frames_.empty() || frames_.back().child_tokens.empty()) return -1;
    return frames_.back().child_tokens.back();
}

Expression SamplerState::expression() const {
    const Vocab vocab(*g_);
    Expression e;
    int c = 0;
    for (int t : tokens_) {
        if (vocab.is_var(t))
            e.tokens.push_back(Token::variable(t));
        else if (vocab.is_const(t))
            e.tokens.push_back(Token::constant(c++));
        else
            e.tokens.push_back(Token::operation(vocab.op(t)));
    }
    e.constant_units = constant_units_;
    return e;
}

void to_json(nlohmann::json& j, const SamplerConfig& c) {
    j = {{"variable_weight", c.variable_weight},
         {"constant_weight", c.constant_weight},
         {"binary_weight", c.binary_weight},
         {"unary_weight", c.unary_weight},
         {"transcendental_weight", c.transcendental_weight},
         {"length_loc", c.length_loc},
         {"length_scale", c.length_scale},
         {"soft_length_prior", c.soft_length_prior}};
}

void from_json(const nlohmann::json& j, SamplerConfig& c) {
    c = SamplerConfig{};
    c.variable_weight = j.value("variable_weight", c.variable_weight);
    c.constant_weight = j.value("constant_weight", c.constant_weight);
    c.binary_weight = j.value("binary_weight", c.binary_weight);
    c.unary_weight = j.value("unary_weight", c.unary_weight);
    c.transcendental_weight = j.value("transcendental_weight", c.transcendental_weight);
    c.length_loc = j.value("length_loc", c.length_loc);
    c.length_scale = j.value("length_scale", c.length_scale);
    c.soft_length_prior = j.value("soft_length_prior", c.soft_length_prior);
}

std::vector<double> base_token_weights(const Grammar& g, const SamplerConfig& c) {
    const Vocab vocab(g);
    std::vector<double> w(static_cast<std::size_t>(g.vocabulary_size()));
    for (int t = 0; t < g.vocabulary_size(); ++t) {
        double v = 0.0;
        if (vocab.is_var(t)) {
            v = c.variable_weight;
        } else if (vocab.is_const(t)) {
            v = c.constant_weight;
        } else {
            const OperatorKind op = vocab.op(t);
            v = units::arity(op) == 2 ? c.binary_weight
                                      : (units::is_transcendental(op) ? c.transcendental_weight : c.unary_weight);
        }
        w[static_cast<std::size_t>(t)] = v;
    }
    return w;
}

double length_prior_factor(const SamplerConfig& c, bool terminal, int min_final_length) {
    if (!c.soft_length_prior) return 1.0;
    const double d = static_cast<double>(min_final_length) - c.length_loc;
    const double gauss = std::exp(-d * d / (2.0 * c.length_scale * c.length_scale));
    if (d < 0.0) return terminal ? gauss : 1.0;
    return terminal ? 1.0 : gauss;
}

int SamplerState::open_slots() const {
    if (complete_) return 0;
    if (frames_.empty()) return 1;
    int open = 0;
    for (const auto& f : frames_) open += f.arity - static_cast<int>(f.child_units.size());
    return open;
}

Expression sample_expression(const Grammar& g, const UnitTable& table, const SamplerConfig& cfg, Rng& rng) {
    const auto base = base_token_weights(g, cfg);
    SamplerState s(g, table);
    std::vector<double> w(base.size());
    while (!s.complete()) {
        double total = 0.0;
        for (int t = 0; t < static_cast<int>(base.size()); ++t) {
            const auto k = static_cast<std::size_t>(t);
            w[k] = s.is_legal(t) ? base[k] * length_prior_factor(cfg, s.is_terminal(t), s.length() + s.open_slots()) : 0.0;
            total += w[k];
        }
        if (!(total > 0.0)) throw MaskExhausted();
        double u = rng.uniform() * total;
        int pick = -1;
        for (int t = 0; t < static_cast<int>(w.size()); ++t) {
            if (w[static_cast<std::size_t>(t)] <= 0.0) continue;
            pick = t;
            u -= w[static_cast<std::size_t>(t)];
            if (u < 0.0) break;
        }
        s.push(pick);
    }
    return s.expression();
}

std::vector<Expression> enumerate_legal(const Grammar& g, const UnitTable& table) {
    std::vector<Expression> out;
    std::function<void(const SamplerState&)> dfs = [&](const SamplerState& s) {
        if (s.complete()) {
            out.push_back(s.expression());
            return;
        }
        for (int t = 0; t < g.vocabulary_size(); ++t) {
            if (!s.is_legal(t)) continue;
            SamplerState next = s;
            next.push(t);
            dfs(next);
        }
    };
    dfs(SamplerState(g, table));
    return out;
}

namespace {

// Constant units by slot semantics, computed top-down on a finished tree.
std::optional<UnitVector> slot_units(const Expression& e, const Grammar& g, std::size_t& pos,
                                     const std::optional<UnitVector>& req, std::vector<UnitVector>& const_units) {
    const Token t = e.tokens.at(pos++);
    if (t.kind == Token::Kind::Variable) return g.variables[static_cast<std::size_t>(t.index)].unit;
    if (t.kind == Token::Kind::Constant) {
        const UnitVector u = req ? *req : UnitVector::dimensionless();
        const_units.push_back(u);
        return u;
    }
    std::vector<UnitVector> kids;
    auto child = [&](const std::optional<UnitVector>& r) {
        auto u = slot_units(e, g, pos, r, const_units);
        if (u) kids.push_back(*u);
        return u.has_value();
    };
    bool ok = true;
    switch (t.op) {
        case OperatorKind::Add:
        case OperatorKind::Sub: {
            ok = child(req);
            ok = ok && child(kids.empty() ? std::nullopt : std::optional<UnitVector>(kids[0]));
            break;
        }
        case OperatorKind::Mul:
        case OperatorKind::Div: {
            ok = child(std::nullopt);
            std::optional<UnitVector> r;
            if (ok && req) r = t.op == OperatorKind::Mul ? *req - kids[0] : kids[0] - *req;
            ok = ok && child(r);
            break;
        }
        case OperatorKind::Inv: ok = child(req ? std::optional<UnitVector>(-*req) : std::nullopt); break;
        case OperatorKind::Square:
            ok = child(req ? std::optional<UnitVector>(Rational(1, 2) * *req) : std::nullopt);
            break;
        case OperatorKind::Sqrt: ok = child(req ? std::optional<UnitVector>(Rational(2) * *req) : std::nullopt); break;
        default: ok = child(UnitVector::dimensionless()); break;
    }
    if (!ok) return std::nullopt;
    return units::try_propagate_units(t.op, kids);
}

}  // namespace

std::vector<Expression> enumerate_valid(const Grammar& g) {
    const Vocab vocab(g);
    std::vector<Expression> out;
    std::vector<int> seq;
    std::function<void(long)> dfs = [&](long open) {
        if (open == 0) {
            Expression e;
            int c = 0;
            for (int t : seq) {
                if (vocab.is_var(t))
                    e.tokens.push_back(Token::variable(t));
                else if (vocab.is_const(t))
                    e.tokens.push_back(Token::constant(c++));
                else
                    e.tokens.push_back(Token::operation(vocab.op(t)));
            }
            std::size_t pos = 0;
            std::vector<UnitVector> cu;
            if (!slot_units(e, g, pos, g.target_unit, cu)) return;
            e.constant_units = cu;
            if (!grammar_violation(e, g)) out.push_back(std::move(e));
            return;
        }
        if (static_cast<long>(seq.size()) + open > g.priors.max_length) return;
        for (int t = 0; t < g.vocabulary_size(); ++t) {
            const int ar = vocab.is_var(t) || vocab.is_const(t) ? 0 : units::arity(vocab.op(t));
            seq.push_back(t);
            dfs(open - 1 + ar);
            seq.pop_back();
        }
    };
    dfs(1);
    return out;
}

}  // namespace kiml::symreg
