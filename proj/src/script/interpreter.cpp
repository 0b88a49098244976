#include "rclab/script/interpreter.hpp"

#include <array>
#include <limits>

namespace rclab::script {

namespace {

struct Abort {
    std::string reason;
};

struct ReturnSignal {};

std::int64_t truncate(std::int64_t v, Width w)
{
    switch (w) {
    case Width::U8:
        return v & 0xFF;
    case Width::U16:
        return v & 0xFFFF;
    case Width::U32:
        return v & 0xFFFFFFFFLL;
    default:
        return v;
    }
}

std::uint64_t u(std::int64_t v) { return static_cast<std::uint64_t>(v); }
std::int64_t s(std::uint64_t v) { return static_cast<std::int64_t>(v); }

bool is_unsigned(const Expr& a, const Expr& b) { return a.type == ValType::U64 || b.type == ValType::U64; }

bool less(std::int64_t a, std::int64_t b, bool uns) { return uns ? u(a) < u(b) : a < b; }

class Machine {
public:
    Machine(const Program& p, std::span<const std::byte> state, const TxStatusContext& ctx, std::int64_t budget)
        : p_(p), ctx_(ctx.args()), budget_(budget), locals_(p.slots.size(), 0)
    {
        state_.reserve(state.size());
        for (std::byte b : state) state_.push_back(std::to_integer<std::uint8_t>(b));
        for (const auto& a : p.scratch) scratch_.emplace_back(a.size, 0);
    }

    void run()
    {
        try {
            body(p_.body);
        } catch (const ReturnSignal&) {
        }
    }

    std::int64_t steps = 0;
    std::optional<std::uint8_t> chosen;
    std::vector<std::uint8_t> state_;

private:
    void charge(std::int64_t n = 1)
    {
        steps += n;
        if (steps > budget_) throw Abort{"instruction budget of " + std::to_string(budget_) + " exceeded"};
    }

    std::vector<std::uint8_t>& array(Expr::Ref ref, int slot)
    {
        return ref == Expr::Ref::State ? state_ : scratch_[static_cast<std::size_t>(slot)];
    }

    std::size_t checked(const std::string& name, std::vector<std::uint8_t>& arr, std::int64_t idx, int line)
    {
        if (u(idx) >= arr.size()) {
            throw Abort{"line " + std::to_string(line) + ": index " + std::to_string(idx) + " out of range for '" + name + "'"};
        }
        return static_cast<std::size_t>(idx);
    }

    std::int64_t eval(const Expr& e)
    {
        switch (e.kind) {
        case Expr::Kind::Int:
            return e.value;
        case Expr::Kind::Name:
            return e.ref == Expr::Ref::Local ? locals_[static_cast<std::size_t>(e.slot)] : e.value;
        case Expr::Kind::Ctx:
            charge();
            return s(ctx_[static_cast<std::size_t>(e.slot)]);
        case Expr::Kind::Index: {
            charge();
            const std::int64_t idx = eval(*e.args[0]);
            auto& arr = array(e.ref, e.slot);
            return arr[checked(e.name, arr, idx, e.line)];
        }
        case Expr::Kind::Unary: {
            charge();
            const std::int64_t a = eval(*e.args[0]);
            if (e.op == "!") return a == 0 ? 1 : 0;
            if (e.op == "-") return s(0 - u(a));
            return ~a;
        }
        case Expr::Kind::Binary:
            charge();
            return binary(e);
        case Expr::Kind::Ternary:
            charge();
            return eval(*e.args[0]) != 0 ? eval(*e.args[1]) : eval(*e.args[2]);
        case Expr::Kind::Call:
            charge();
            return call(e);
        case Expr::Kind::Cast:
            charge();
            return truncate(eval(*e.args[0]), e.cast);
        }
        return 0;
    }

    std::int64_t binary(const Expr& e)
    {
        const std::string& op = e.op;
        if (op == "&&") return eval(*e.args[0]) != 0 && eval(*e.args[1]) != 0 ? 1 : 0;
        if (op == "||") return eval(*e.args[0]) != 0 || eval(*e.args[1]) != 0 ? 1 : 0;
        const std::int64_t a = eval(*e.args[0]);
        const std::int64_t b = eval(*e.args[1]);
        const bool uns = is_unsigned(*e.args[0], *e.args[1]);
        if (op == "+") return s(u(a) + u(b));
        if (op == "-") return s(u(a) - u(b));
        if (op == "*") return s(u(a) * u(b));
        if (op == "/" || op == "%") {
            if (b == 0) return 0;  // division by zero yields 0
            if (uns) return s(op == "/" ? u(a) / u(b) : u(a) % u(b));
            if (a == std::numeric_limits<std::int64_t>::min() && b == -1) return op == "/" ? a : 0;
            return op == "/" ? a / b : a % b;
        }
        if (op == "&") return a & b;
        if (op == "|") return a | b;
        if (op == "^") return a ^ b;
        if (op == "<<") return s(u(a) << (u(b) & 63));
        if (op == ">>") {
            const unsigned n = static_cast<unsigned>(u(b) & 63);
            return e.args[0]->type == ValType::U64 ? s(u(a) >> n) : a >> n;
        }
        if (op == "==") return a == b;
        if (op == "!=") return a != b;
        if (op == "<") return less(a, b, uns);
        if (op == ">") return less(b, a, uns);
        if (op == "<=") return !less(b, a, uns);
        if (op == ">=") return !less(a, b, uns);
        throw Abort{"unknown operator '" + op + "'"};
    }

    std::int64_t call(const Expr& e)
    {
        std::vector<std::int64_t> v;
        for (const auto& a : e.args) v.push_back(eval(*a));
        const bool uns = e.type == ValType::U64;
        if (e.name == "min" && v.size() == 2) return less(v[1], v[0], uns) ? v[1] : v[0];
        if (e.name == "max" && v.size() == 2) return less(v[0], v[1], uns) ? v[1] : v[0];
        if (e.name == "clamp" && v.size() == 2) return !less(v[0], v[1], uns) ? s(u(v[1]) - 1) : v[0];
        if (e.name == "clamp" && v.size() == 3) {
            if (less(v[0], v[1], uns)) return v[1];
            if (less(v[2], v[0], uns)) return v[2];
            return v[0];
        }
        throw Abort{"unknown function '" + e.name + "'"};
    }

    void body(const std::vector<StmtPtr>& b)
    {
        for (const auto& st : b) stmt(*st);
    }

    void stmt(const Stmt& st)
    {
        switch (st.kind) {
        case Stmt::Kind::Decl:
        case Stmt::Kind::Assign: {
            charge();
            const std::int64_t v = eval(*st.value);
            locals_[static_cast<std::size_t>(st.slot)] = truncate(v, p_.slots[static_cast<std::size_t>(st.slot)]);
            break;
        }
        case Stmt::Kind::Store: {
            charge();
            const std::int64_t idx = eval(*st.index);
            const std::int64_t v = eval(*st.value);
            auto& arr = array(st.ref, st.slot);
            arr[checked(st.name, arr, idx, st.line)] = static_cast<std::uint8_t>(v & 0xFF);
            break;
        }
        case Stmt::Kind::If:
            charge();
            body(eval(*st.value) != 0 ? st.body : st.else_body);
            break;
        case Stmt::Kind::For:
            for (std::int64_t i = st.lo; i < st.hi; ++i) {
                charge();
                locals_[static_cast<std::size_t>(st.slot)] = i;
                body(st.body);
            }
            break;
        case Stmt::Kind::While:
            while (true) {
                charge();
                if (eval(*st.value) == 0) break;
                body(st.body);
            }
            break;
        case Stmt::Kind::Use:
            charge();
            body(p_.blocks[static_cast<std::size_t>(st.block)].body);
            break;
        case Stmt::Kind::WriteRate: {
            charge();
            const std::int64_t v = eval(*st.value);
            if (v >= 0 && v < 8) chosen = static_cast<std::uint8_t>(v);
            break;
        }
        case Stmt::Kind::Return:
            charge();
            throw ReturnSignal{};
        }
    }

    const Program& p_;
    std::array<std::uint64_t, TxStatusContext::kFieldCount> ctx_;
    std::int64_t budget_;
    std::vector<std::int64_t> locals_;
    std::vector<std::vector<std::uint8_t>> scratch_;
};

}  // namespace

ExecResult execute(const Program& program, std::span<const std::byte> state, const TxStatusContext& ctx,
                   std::int64_t budget)
{
    if (state.size() != program.state_size()) {
        throw std::invalid_argument("state is " + std::to_string(state.size()) + " bytes, program declares " +
                                    std::to_string(program.state_size()));
    }
    if (!program.resolve_errors.empty()) {
        throw std::invalid_argument("program has unresolved names");
    }
    ExecResult r;
    Machine m(program, state, ctx, budget);
    try {
        m.run();
    } catch (const Abort& a) {
        r.state.assign(state.begin(), state.end());
        r.aborted = true;
        r.reason = a.reason;
        r.steps = m.steps;
        return r;
    }
    r.state.reserve(m.state_.size());
    for (std::uint8_t b : m.state_) r.state.push_back(std::byte{b});
    r.chosen = m.chosen;
    r.steps = m.steps;
    return r;
}

LoadedPolicy load_policy(const std::string& source, const std::string& name)
{
    LoadedPolicy out;
    out.program = parse(source, name);
    out.lint = lint(*out.program);
    out.verifier = verify(*out.program);
    if (!out.verifier.ok) {
        throw PolicyRejected(out.verifier);
    }
    return out;
}

ScriptController::ScriptController(std::shared_ptr<const Program> program) : program_(std::move(program))
{
    if (!program_) throw std::invalid_argument("null program");
}

void ScriptController::on_tx_status(const TxStatusContext& ctx, PolicyEngine& engine)
{
    const std::size_t n = program_->state_size();
    Bytes state;
    const bool has_record = ctx.wcid < kMaxStations;
    if (n > 0) {
        if (!has_record) {
            state.assign(n, std::byte{0});  // no map slot; run on scratch state
        } else {
            state = engine.read_algo(static_cast<std::uint8_t>(ctx.wcid));
            if (state.size() != n) return;  // map belongs to another layout
        }
    }
    const ExecResult r = execute(*program_, state, ctx);
    if (r.aborted) {
        ++aborts_;
        return;
    }
    if (!has_record) return;
    const auto wcid = static_cast<std::uint8_t>(ctx.wcid);
    if (n > 0) engine.write_algo(wcid, r.state);
    if (r.chosen) engine.write_rate_map(wcid, RateMapEntry::from_rate(RateSpec::ht(*r.chosen)));
}

}  // namespace rclab::script
