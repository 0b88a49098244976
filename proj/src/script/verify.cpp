#include <algorithm>
#include <limits>
#include <set>
#include <sstream>

#include "rclab/script/analysis.hpp"

namespace rclab::script {

namespace {

__extension__ typedef __int128 I128;

constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max();

std::int64_t sat_add(std::int64_t a, std::int64_t b) { return a > kUnbounded - b ? kUnbounded : a + b; }

std::int64_t sat_mul(std::int64_t a, std::int64_t b)
{
    if (a == 0 || b == 0) return 0;
    return a > kUnbounded / b ? kUnbounded : a * b;
}

// Instruction cost --------------------------------------------------------

class Coster {
public:
    explicit Coster(const Program& p) : p_(p), memo_(p.blocks.size(), -1), busy_(p.blocks.size(), false) {}

    std::int64_t program() { return body(p_.body); }

    std::int64_t block(int i)
    {
        const auto k = static_cast<std::size_t>(i);
        if (busy_[k]) return kUnbounded;
        if (memo_[k] >= 0) return memo_[k];
        busy_[k] = true;
        const std::int64_t c = body(p_.blocks[k].body);
        busy_[k] = false;
        memo_[k] = c;
        return c;
    }

    static std::int64_t expr(const Expr& e)
    {
        std::int64_t c = 0;
        for (const auto& a : e.args) {
            c = sat_add(c, expr(*a));
        }
        switch (e.kind) {
        case Expr::Kind::Int:
        case Expr::Kind::Name:
            return c;
        default:
            return sat_add(c, 1);
        }
    }

    std::int64_t body(const std::vector<StmtPtr>& b)
    {
        std::int64_t c = 0;
        for (const auto& s : b) {
            c = sat_add(c, stmt(*s));
        }
        return c;
    }

    std::int64_t stmt(const Stmt& s)
    {
        switch (s.kind) {
        case Stmt::Kind::Decl:
        case Stmt::Kind::Assign:
        case Stmt::Kind::WriteRate:
            return sat_add(1, expr(*s.value));
        case Stmt::Kind::Store:
            return sat_add(1, sat_add(expr(*s.index), expr(*s.value)));
        case Stmt::Kind::If:
            return sat_add(sat_add(1, expr(*s.value)), sat_add(body(s.body), body(s.else_body)));
        case Stmt::Kind::For: {
            if (!s.const_bounds) return kUnbounded;
            const std::int64_t trips = s.hi > s.lo ? s.hi - s.lo : 0;
            return sat_mul(trips, sat_add(1, body(s.body)));
        }
        case Stmt::Kind::While:
            return kUnbounded;
        case Stmt::Kind::Use:
            return s.block < 0 ? 1 : sat_add(1, block(s.block));
        case Stmt::Kind::Return:
            return 1;
        }
        return 0;
    }

private:
    const Program& p_;
    std::vector<std::int64_t> memo_;
    std::vector<bool> busy_;
};

// Interval analysis -------------------------------------------------------

struct Range {
    bool top = true;
    std::int64_t lo = 0;
    std::int64_t hi = 0;

    static Range exact(std::int64_t v) { return {false, v, v}; }
    static Range of(std::int64_t lo, std::int64_t hi) { return {false, lo, hi}; }
    static Range any() { return {}; }

    bool nonneg() const { return !top && lo >= 0; }
};

Range hull(const Range& a, const Range& b)
{
    if (a.top || b.top) return Range::any();
    return Range::of(std::min(a.lo, b.lo), std::max(a.hi, b.hi));
}

Range from128(I128 lo, I128 hi)
{
    if (lo < std::numeric_limits<std::int64_t>::min() || hi > std::numeric_limits<std::int64_t>::max()) {
        return Range::any();
    }
    return Range::of(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi));
}

Range width_range(Width w)
{
    switch (w) {
    case Width::U8:
        return Range::of(0, 0xFF);
    case Width::U16:
        return Range::of(0, 0xFFFF);
    case Width::U32:
        return Range::of(0, 0xFFFFFFFFLL);
    default:
        return Range::any();
    }
}

/// Value range after truncation to `w`.
Range truncate(const Range& r, Width w)
{
    const Range full = width_range(w);
    if (full.top) return r;
    if (!r.top && r.lo >= full.lo && r.hi <= full.hi) return r;
    return full;
}

class Verifier {
public:
    explicit Verifier(const Program& p) : p_(p), env_(p.slots.size()), busy_(p.blocks.size(), false) {}

    void run()
    {
        body(p_.body);
    }

    std::vector<std::string> errors;

private:
    using Env = std::vector<Range>;

    std::size_t array_size(Expr::Ref ref, int slot) const
    {
        if (ref == Expr::Ref::State) return p_.state_size();
        if (ref == Expr::Ref::Scratch && slot >= 0) return p_.scratch[static_cast<std::size_t>(slot)].size;
        return 0;
    }

    void check_index(const std::string& array, Expr::Ref ref, int slot, const Expr& index, int line)
    {
        if (ref != Expr::Ref::State && ref != Expr::Ref::Scratch) return;
        const std::size_t size = array_size(ref, slot);
        const Range r = eval(index);
        if (!r.top && r.lo >= 0 && static_cast<std::uint64_t>(r.hi) < size) return;
        const std::string shown = r.top ? "[unbounded]" : "[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]";
        errors.push_back("line " + std::to_string(line) + ": index of '" + array + "' may be out of bounds: range " +
                         shown + " not within [0, " + std::to_string(static_cast<std::int64_t>(size) - 1) + "]");
    }

    Range eval(const Expr& e)
    {
        switch (e.kind) {
        case Expr::Kind::Int:
            return Range::exact(e.value);
        case Expr::Kind::Name:
            if (e.ref == Expr::Ref::Const) return Range::exact(e.value);
            if (e.ref == Expr::Ref::Local) return env_[static_cast<std::size_t>(e.slot)];
            return Range::any();
        case Expr::Kind::Ctx:
            return Range::any();
        case Expr::Kind::Index:
            check_index(e.name, e.ref, e.slot, *e.args[0], e.line);
            return Range::of(0, 0xFF);
        case Expr::Kind::Unary: {
            const Range a = eval(*e.args[0]);
            if (e.op == "!") return Range::of(0, 1);
            if (a.top) return a;
            if (e.op == "-") return from128(-static_cast<I128>(a.hi), -static_cast<I128>(a.lo));
            return Range::of(~a.hi, ~a.lo);
        }
        case Expr::Kind::Binary:
            return binary(e);
        case Expr::Kind::Ternary: {
            eval(*e.args[0]);
            const Range a = eval(*e.args[1]);
            const Range b = eval(*e.args[2]);
            return hull(a, b);
        }
        case Expr::Kind::Call:
            return call(e);
        case Expr::Kind::Cast: {
            Range r = Range::any();
            for (const auto& a : e.args) r = eval(*a);
            return truncate(r, e.cast);
        }
        }
        return Range::any();
    }

    Range binary(const Expr& e)
    {
        const Range a = eval(*e.args[0]);
        const Range b = eval(*e.args[1]);
        const std::string& op = e.op;
        if (op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=" || op == "&&" || op == "||") {
            return Range::of(0, 1);
        }
        if (a.top || b.top) {
            // `x & K` and `x % K` stay bounded by a non-negative constant side.
            if (op == "&" && (a.nonneg() || b.nonneg())) {
                return Range::of(0, a.nonneg() ? a.hi : b.hi);
            }
            if (op == "%" && b.nonneg() && b.lo > 0 && e.type == ValType::U64) {
                return Range::of(0, b.hi - 1);
            }
            return Range::any();
        }
        if (op == "+") return from128(I128(a.lo) + b.lo, I128(a.hi) + b.hi);
        if (op == "-") return from128(I128(a.lo) - b.hi, I128(a.hi) - b.lo);
        if (op == "*") {
            const I128 c[] = {I128(a.lo) * b.lo, I128(a.lo) * b.hi, I128(a.hi) * b.lo, I128(a.hi) * b.hi};
            return from128(*std::min_element(std::begin(c), std::end(c)), *std::max_element(std::begin(c), std::end(c)));
        }
        if (!a.nonneg() || !b.nonneg()) {
            return Range::any();
        }
        // Both sides non-negative from here on: signed and unsigned agree.
        if (op == "&") return Range::of(0, std::min(a.hi, b.hi));
        if (op == "%") return b.lo > 0 ? Range::of(0, std::min(a.hi, b.hi - 1)) : Range::of(0, a.hi);
        if (op == "/") return b.lo > 0 ? Range::of(a.lo / b.hi, a.hi / b.lo) : Range::of(0, a.hi);
        if (op == ">>") return b.hi < 64 ? Range::of(a.lo >> b.hi, a.hi >> b.lo) : Range::of(0, a.hi);
        return Range::any();
    }

    Range call(const Expr& e)
    {
        std::vector<Range> r;
        for (const auto& a : e.args) r.push_back(eval(*a));
        const bool all_nonneg = std::all_of(r.begin(), r.end(), [](const Range& x) { return x.nonneg(); });
        const bool signed_cmp = e.type == ValType::I64;
        if (std::any_of(r.begin(), r.end(), [](const Range& x) { return x.top; })) {
            // Unsigned clamp(x, n) lands in [0, n - 1] whatever x is.
            if (e.name == "clamp" && r.size() == 2 && r[1].nonneg() && r[1].lo > 0 && !signed_cmp) {
                return Range::of(0, r[1].hi - 1);
            }
            if (e.name == "clamp" && r.size() == 3 && !r[1].top && !r[2].top && (signed_cmp || (r[1].nonneg() && r[2].nonneg()))) {
                return hull(r[1], r[2]);
            }
            if (e.name == "min" && r.size() == 2 && !signed_cmp) {
                if (r[0].nonneg()) return Range::of(0, r[0].hi);
                if (r[1].nonneg()) return Range::of(0, r[1].hi);
            }
            return Range::any();
        }
        if (!signed_cmp && !all_nonneg) return Range::any();
        if (e.name == "min" && r.size() == 2) return Range::of(std::min(r[0].lo, r[1].lo), std::min(r[0].hi, r[1].hi));
        if (e.name == "max" && r.size() == 2) return Range::of(std::max(r[0].lo, r[1].lo), std::max(r[0].hi, r[1].hi));
        if (e.name == "clamp" && r.size() == 2) {
            // x >= n ? n - 1 : x
            const Range passed = Range::of(r[0].lo, std::min(r[0].hi, r[1].hi - 1));
            const Range capped = Range::of(r[1].lo - 1, r[1].hi - 1);
            if (r[0].hi < r[1].lo) return r[0];
            if (r[0].lo >= r[1].hi) return capped;
            return passed.lo <= passed.hi ? hull(passed, capped) : capped;
        }
        if (e.name == "clamp" && r.size() == 3) {
            return hull(Range::of(std::max(r[0].lo, r[1].lo), std::min(r[0].hi, r[2].hi)), hull(r[1], r[2]));
        }
        return Range::any();
    }

    /// Narrowing from the conjuncts of a condition known to hold.
    void narrow(const Expr& cond)
    {
        if (cond.kind != Expr::Kind::Binary) return;
        if (cond.op == "&&") {
            narrow(*cond.args[0]);
            narrow(*cond.args[1]);
            return;
        }
        const Expr& lhs = *cond.args[0];
        const Expr& rhs = *cond.args[1];
        if (lhs.kind != Expr::Kind::Name || lhs.ref != Expr::Ref::Local) return;
        const bool konst = rhs.kind == Expr::Kind::Int || (rhs.kind == Expr::Kind::Name && rhs.ref == Expr::Ref::Const);
        if (!konst) return;
        const bool unsigned_cmp = lhs.type == ValType::U64 || rhs.type == ValType::U64;
        const std::int64_t k = rhs.value;
        Range& v = env_[static_cast<std::size_t>(lhs.slot)];
        Range n = v.top ? Range::of(std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max()) : v;
        if (cond.op == "<" || cond.op == "<=") {
            const std::int64_t bound = cond.op == "<" ? k - 1 : k;
            if (cond.op == "<" && k == std::numeric_limits<std::int64_t>::min()) return;
            if (unsigned_cmp) {
                if (bound < 0) return;
                n.lo = std::max<std::int64_t>(n.lo, 0);
            }
            n.hi = std::min(n.hi, bound);
        } else if ((cond.op == ">" || cond.op == ">=") && !unsigned_cmp) {
            if (cond.op == ">" && k == std::numeric_limits<std::int64_t>::max()) return;
            n.lo = std::max(n.lo, cond.op == ">" ? k + 1 : k);
        } else if (cond.op == "==") {
            n.lo = std::max(n.lo, k);
            n.hi = std::min(n.hi, k);
        } else {
            return;
        }
        if (n.lo > n.hi) return;  // infeasible branch; keep the old range
        v = n;
    }

    void body(const std::vector<StmtPtr>& b)
    {
        for (const auto& s : b) stmt(*s);
    }

    void assigned_slots(const std::vector<StmtPtr>& b, std::set<int>& out, std::set<int>& seen_blocks) const
    {
        for (const auto& s : b) {
            if ((s->kind == Stmt::Kind::Assign || s->kind == Stmt::Kind::Decl || s->kind == Stmt::Kind::For) && s->slot >= 0 &&
                s->ref == Expr::Ref::Local) {
                out.insert(s->slot);
            }
            assigned_slots(s->body, out, seen_blocks);
            assigned_slots(s->else_body, out, seen_blocks);
            if (s->kind == Stmt::Kind::Use && s->block >= 0 && seen_blocks.insert(s->block).second) {
                assigned_slots(p_.blocks[static_cast<std::size_t>(s->block)].body, out, seen_blocks);
            }
        }
    }

    void havoc(const std::set<int>& slots)
    {
        for (int s : slots) {
            env_[static_cast<std::size_t>(s)] = width_range(p_.slots[static_cast<std::size_t>(s)]);
        }
    }

    void stmt(const Stmt& s)
    {
        switch (s.kind) {
        case Stmt::Kind::Decl:
        case Stmt::Kind::Assign: {
            const Range r = eval(*s.value);
            if (s.ref == Expr::Ref::Local && s.slot >= 0) {
                env_[static_cast<std::size_t>(s.slot)] = truncate(r, p_.slots[static_cast<std::size_t>(s.slot)]);
            }
            break;
        }
        case Stmt::Kind::Store:
            check_index(s.name, s.ref, s.slot, *s.index, s.line);
            eval(*s.value);
            break;
        case Stmt::Kind::If: {
            eval(*s.value);
            const Env entry = env_;
            narrow(*s.value);
            body(s.body);
            const Env then_env = env_;
            env_ = entry;
            body(s.else_body);
            for (std::size_t i = 0; i < env_.size(); ++i) {
                env_[i] = hull(env_[i], then_env[i]);
            }
            break;
        }
        case Stmt::Kind::For:
        case Stmt::Kind::While: {
            std::set<int> slots;
            std::set<int> seen;
            assigned_slots(s.body, slots, seen);
            if (s.kind == Stmt::Kind::For) {
                eval(*s.index);
                eval(*s.value);
                if (s.const_bounds && s.hi <= s.lo) break;  // body never runs
            }
            havoc(slots);
            if (s.kind == Stmt::Kind::For && s.slot >= 0) {
                env_[static_cast<std::size_t>(s.slot)] = s.const_bounds ? Range::of(s.lo, s.hi - 1) : Range::any();
            } else {
                eval(*s.value);
            }
            body(s.body);
            havoc(slots);
            break;
        }
        case Stmt::Kind::Use: {
            if (s.block < 0) break;
            const auto k = static_cast<std::size_t>(s.block);
            if (busy_[k]) break;  // cycle, reported separately
            busy_[k] = true;
            body(p_.blocks[k].body);
            busy_[k] = false;
            break;
        }
        case Stmt::Kind::WriteRate:
            eval(*s.value);
            break;
        case Stmt::Kind::Return:
            break;
        }
    }

    const Program& p_;
    Env env_;
    std::vector<bool> busy_;
};

// Structural checks -------------------------------------------------------

void find_loops(const std::vector<StmtPtr>& b, std::vector<std::string>& errors)
{
    for (const auto& s : b) {
        if (s->kind == Stmt::Kind::While) {
            errors.push_back("line " + std::to_string(s->line) + ": while loop has no static trip count");
        } else if (s->kind == Stmt::Kind::For && !s->const_bounds) {
            errors.push_back("line " + std::to_string(s->line) + ": for loop bounds must be constants");
        }
        find_loops(s->body, errors);
        find_loops(s->else_body, errors);
    }
}

void block_uses(const std::vector<StmtPtr>& b, std::set<int>& out)
{
    for (const auto& s : b) {
        if (s->kind == Stmt::Kind::Use && s->block >= 0) out.insert(s->block);
        block_uses(s->body, out);
        block_uses(s->else_body, out);
    }
}

bool reaches(const Program& p, int from, int target, std::set<int>& seen)
{
    std::set<int> uses;
    block_uses(p.blocks[static_cast<std::size_t>(from)].body, uses);
    for (int u : uses) {
        if (u == target) return true;
        if (seen.insert(u).second && reaches(p, u, target, seen)) return true;
    }
    return false;
}

}  // namespace

std::int64_t instruction_estimate(const Program& program) { return Coster(program).program(); }

VerifierReport verify(const Program& program)
{
    std::vector<std::string> errors;
    for (const auto& e : program.resolve_errors) {
        errors.push_back("line " + std::to_string(e.line) + ": " + e.message);
    }
    if (program.state_size() > kMaxStateBytes) {
        errors.push_back("state array '" + program.state->name + "' is " + std::to_string(program.state_size()) +
                         " bytes; limit is " + std::to_string(kMaxStateBytes));
    }
    std::size_t stack = program.slots.size() * 8;
    for (const auto& a : program.scratch) stack += a.size;
    if (stack > kStackLimitBytes) {
        errors.push_back("stack use " + std::to_string(stack) + " bytes (scratch plus 8 per local) exceeds " +
                         std::to_string(kStackLimitBytes));
    }
    for (std::size_t i = 0; i < program.blocks.size(); ++i) {
        const auto& b = program.blocks[i];
        if (!b.is_inline) {
            errors.push_back("line " + std::to_string(b.line) + ": block '" + b.name + "' must be declared inline");
        }
        std::set<int> seen;
        if (reaches(program, static_cast<int>(i), static_cast<int>(i), seen)) {
            errors.push_back("line " + std::to_string(b.line) + ": block '" + b.name + "' uses itself recursively");
        }
    }
    find_loops(program.body, errors);
    for (const auto& b : program.blocks) find_loops(b.body, errors);

    const std::int64_t estimate = instruction_estimate(program);
    if (estimate > kInstructionBudget) {
        errors.push_back(estimate == kUnbounded ? std::string("instruction count is unbounded")
                                                : "instruction estimate " + std::to_string(estimate) +
                                                      " exceeds limit " + std::to_string(kInstructionBudget));
    }
    // Bounds proofs need resolved names and finite loops.
    if (program.resolve_errors.empty()) {
        Verifier v(program);
        v.run();
        errors.insert(errors.end(), v.errors.begin(), v.errors.end());
    }
    // Same message can come from a block used twice.
    std::vector<std::string> unique;
    for (auto& e : errors) {
        if (std::find(unique.begin(), unique.end(), e) == unique.end()) unique.push_back(std::move(e));
    }

    VerifierReport report;
    report.ok = unique.empty();
    report.instruction_estimate = estimate;

    std::ostringstream head;
    head << "verifying '" << program.name << "': state " << program.state_size() << " bytes, stack " << stack
         << " bytes, " << program.blocks.size() << " block(s)\n";
    std::string body;
    for (const auto& e : unique) body += "error: " + e + "\n";
    body += "instruction estimate: " +
            (estimate == kUnbounded ? std::string("unbounded") : std::to_string(estimate)) + " (limit " +
            std::to_string(kInstructionBudget) + ")\n";
    const std::string tail = report.ok ? "result: accepted\n"
                                       : "result: rejected with " + std::to_string(unique.size()) + " error(s)\n";
    std::string log = head.str() + body;
    const std::string cut = "...[log truncated]\n";
    if (log.size() + tail.size() > kVerifierLogLimit) {
        log.resize(kVerifierLogLimit - tail.size() - cut.size());
        log += cut;
    }
    report.log = log + tail;
    return report;
}

}  // namespace rclab::script
