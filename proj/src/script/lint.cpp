#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "rclab/script/analysis.hpp"

namespace rclab::script {

namespace {

constexpr unsigned kFromState = 1;
constexpr unsigned kFromCtx = 2;

class Linter {
public:
    explicit Linter(const Program& p) : p_(p), taint_(p.slots.size(), 0), version_(p.slots.size(), 0) {}

    std::vector<LintDiagnostic> run()
    {
        check_stack();
        for (const auto& b : p_.blocks) {
            if (!b.is_inline) {
                emit(3, b.line, "block '" + b.name + "' is not marked inline");
            }
            std::fill(taint_.begin(), taint_.end(), 0);
            walk(b.body, 0);
        }
        std::fill(taint_.begin(), taint_.end(), 0);
        bounds_.clear();
        walk(p_.body, 0);

        std::vector<LintDiagnostic> out;
        for (const auto& [key, msg] : found_) {
            out.push_back({std::get<1>(key), std::get<0>(key), msg});
        }
        return out;
    }

private:
    void emit(int rule, int line, std::string msg) { found_.emplace(std::make_tuple(line, rule, msg), msg); }

    void check_stack()
    {
        std::size_t total = 0;
        for (const auto& a : p_.arrays) {
            const std::size_t before = total;
            total += a.size;
            if (before <= kStackLimitBytes && total > kStackLimitBytes) {
                emit(5, a.line,
                     "declared state and scratch total " + std::to_string(total) + " bytes, over the " +
                         std::to_string(kStackLimitBytes) + "-byte limit");
            }
        }
    }

    const ArrayDecl* array_of(Expr::Ref ref, int slot) const
    {
        if (ref == Expr::Ref::State) return p_.state ? &*p_.state : nullptr;
        if (ref == Expr::Ref::Scratch && slot >= 0) return &p_.scratch[static_cast<std::size_t>(slot)];
        return nullptr;
    }

    unsigned taint(const Expr& e)
    {
        unsigned t = 0;
        for (const auto& a : e.args) {
            t |= taint(*a);
        }
        switch (e.kind) {
        case Expr::Kind::Ctx:
            t |= kFromCtx;
            break;
        case Expr::Kind::Name:
            if (e.ref == Expr::Ref::Local) t |= taint_[static_cast<std::size_t>(e.slot)];
            break;
        case Expr::Kind::Index:
            if (e.ref == Expr::Ref::State) t |= kFromState;
            check_access(e.name, e.ref, e.slot, *e.args[0], e.line);
            break;
        default:
            break;
        }
        return t;
    }

    void check_access(const std::string& array, Expr::Ref ref, int slot, const Expr& index, int line)
    {
        const ArrayDecl* decl = array_of(ref, slot);
        if (decl == nullptr) {
            return;
        }
        const unsigned t = taint_no_check(index);
        if (t == 0) {
            return;
        }
        if (index.kind == Expr::Kind::Name && index.ref == Expr::Ref::Local) {
            const auto it = bounds_.find(index.slot);
            if (it != bounds_.end() && it->second <= static_cast<std::int64_t>(decl->size)) {
                return;
            }
        }
        const std::string what = index.kind == Expr::Kind::Name ? "'" + index.name + "'" : "an expression";
        emit(1, line,
             "'" + array + "' indexed by " + what + " derived from " + (t & kFromState ? "state" : "ctx") +
                 " without a preceding bounds check");
    }

    unsigned taint_no_check(const Expr& e) const
    {
        unsigned t = 0;
        for (const auto& a : e.args) {
            t |= taint_no_check(*a);
        }
        if (e.kind == Expr::Kind::Ctx) t |= kFromCtx;
        if (e.kind == Expr::Kind::Index && e.ref == Expr::Ref::State) t |= kFromState;
        if (e.kind == Expr::Kind::Name && e.ref == Expr::Ref::Local) t |= taint_[static_cast<std::size_t>(e.slot)];
        return t;
    }

    /// Bounds established by `v < K` conjuncts of a condition.
    void collect_bounds(const Expr& cond, std::map<int, std::int64_t>& out) const
    {
        if (cond.kind != Expr::Kind::Binary) {
            return;
        }
        if (cond.op == "&&") {
            collect_bounds(*cond.args[0], out);
            collect_bounds(*cond.args[1], out);
            return;
        }
        const Expr& lhs = *cond.args[0];
        const Expr& rhs = *cond.args[1];
        const bool constant = rhs.kind == Expr::Kind::Int || (rhs.kind == Expr::Kind::Name && rhs.ref == Expr::Ref::Const);
        if (cond.op == "<" && lhs.kind == Expr::Kind::Name && lhs.ref == Expr::Ref::Local && constant) {
            auto [it, inserted] = out.emplace(lhs.slot, rhs.value);
            if (!inserted) it->second = std::min(it->second, rhs.value);
        }
    }

    void assign(int slot, unsigned t)
    {
        if (slot < 0) return;
        taint_[static_cast<std::size_t>(slot)] = t;
        ++version_[static_cast<std::size_t>(slot)];
        bounds_.erase(slot);
    }

    void walk(const std::vector<StmtPtr>& body, int depth)
    {
        for (const auto& s : body) {
            stmt(*s, depth);
        }
    }

    void stmt(const Stmt& s, int depth)
    {
        switch (s.kind) {
        case Stmt::Kind::Decl:
        case Stmt::Kind::Assign:
            assign(s.ref == Expr::Ref::Local ? s.slot : -1, taint(*s.value));
            break;
        case Stmt::Kind::Store:
            taint(*s.index);
            taint(*s.value);
            check_access(s.name, s.ref, s.slot, *s.index, s.line);
            break;
        case Stmt::Kind::If:
            if_stmt(s, depth);
            break;
        case Stmt::Kind::For:
        case Stmt::Kind::While:
            loop(s, depth);
            break;
        case Stmt::Kind::WriteRate:
            taint(*s.value);
            break;
        case Stmt::Kind::Use:
        case Stmt::Kind::Return:
            break;
        }
    }

    void if_stmt(const Stmt& s, int depth)
    {
        const unsigned ct = taint(*s.value);
        const int d = depth + ((ct & kFromState) != 0 ? 1 : 0);
        if (d == kMaxStateBranchDepth + 1 && (ct & kFromState) != 0) {
            emit(4, s.line,
                 "conditional nesting on state fields reaches depth " + std::to_string(d) + " (limit " +
                     std::to_string(kMaxStateBranchDepth) + ")");
        }

        const auto saved_bounds = bounds_;
        const auto entry_taint = taint_;
        const auto entry_version = version_;
        std::map<int, std::int64_t> narrowed;
        collect_bounds(*s.value, narrowed);
        for (const auto& [slot, k] : narrowed) {
            auto [it, inserted] = bounds_.emplace(slot, k);
            if (!inserted) it->second = std::min(it->second, k);
        }
        walk(s.body, d);
        const auto then_taint = taint_;

        bounds_ = saved_bounds;
        taint_ = entry_taint;
        if (s.else_if) {
            // `else if` chains sit at the level of the first `if`.
            stmt(*s.else_body.front(), depth);
        } else {
            walk(s.else_body, d);
        }
        for (std::size_t i = 0; i < taint_.size(); ++i) {
            taint_[i] |= then_taint[i];
        }
        bounds_ = saved_bounds;
        // A variable reassigned in either branch loses any outer bound.
        for (auto it = bounds_.begin(); it != bounds_.end();) {
            const auto slot = static_cast<std::size_t>(it->first);
            it = version_[slot] != entry_version[slot]
                     ? bounds_.erase(it)
                     : std::next(it);
        }
    }

    void loop(const Stmt& s, int depth)
    {
        if (!s.unroll) {
            emit(2, s.line, std::string(s.kind == Stmt::Kind::For ? "for" : "while") + " loop without #pragma unroll");
        }
        if (s.kind == Stmt::Kind::While) {
            taint(*s.value);
        } else {
            taint(*s.index);
            taint(*s.value);
            assign(s.slot, 0);
        }
        // Two passes let taint carried around the back edge reach its uses.
        const auto saved_bounds = bounds_;
        walk(s.body, depth);
        bounds_ = saved_bounds;
        walk(s.body, depth);
        bounds_ = saved_bounds;
    }

    const Program& p_;
    std::vector<unsigned> taint_;
    std::vector<unsigned> version_;  // bumped on every assignment
    std::map<int, std::int64_t> bounds_;
    std::map<std::tuple<int, int, std::string>, std::string> found_;
};

}  // namespace

std::vector<LintDiagnostic> lint(const Program& program) { return Linter(program).run(); }

void to_json(nlohmann::json& j, const LintDiagnostic& d)
{
    j = nlohmann::json{{"rule", d.rule}, {"line", d.line}, {"message", d.message}};
}

void to_json(nlohmann::json& j, const VerifierReport& r)
{
    j = nlohmann::json{{"ok", r.ok}, {"log", r.log}, {"instruction_estimate", r.instruction_estimate}};
}

}  // namespace rclab::script
