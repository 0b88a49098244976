#pragma once

// Syntax tree of the rate-policy language. See docs/dsl.md for the grammar.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclab::script {

inline constexpr std::size_t kMaxSourceBytes = 64 * 1024;

class ParseError : public std::runtime_error {
public:
    ParseError(int line, int column, const std::string& message);
    int line() const { return line_; }
    int column() const { return column_; }
    /// The message without the position prefix.
    const std::string& detail() const { return detail_; }

private:
    int line_;
    int column_;
    std::string detail_;
};

/// Storage width of a local; assignment truncates to it.
enum class Width : std::uint8_t { U8, U16, U32, U64, I64 };

/// Static signedness of an expression. Comparisons, division, modulo and
/// right shift are unsigned when either operand is U64.
enum class ValType : std::uint8_t { I64, U64 };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
    enum class Kind { Int, Name, Ctx, Index, Unary, Binary, Ternary, Call, Cast };
    /// What a Name or Index resolves to.
    enum class Ref { Unresolved, Local, Const, State, Scratch };

    Kind kind = Kind::Int;
    int line = 0;
    std::int64_t value = 0;  // Int literal, or the value of a resolved Const
    std::string name;        // Name, Index (array), Call (function), Ctx (field)
    std::string op;          // Unary / Binary operator
    Width cast = Width::I64;
    std::vector<ExprPtr> args;

    Ref ref = Ref::Unresolved;
    int slot = -1;  // local slot, ctx field index, or scratch array index
    ValType type = ValType::I64;
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Stmt {
    enum class Kind { Decl, Assign, Store, If, For, While, Use, WriteRate, Return };

    Kind kind = Kind::Return;
    int line = 0;
    std::string name;  // declared/assigned local, store array, loop var, used block
    Width width = Width::I64;
    ExprPtr index;  // Store index; For lower bound
    ExprPtr value;  // Decl/Assign/Store/WriteRate value; If/While condition; For upper bound
    std::vector<StmtPtr> body;
    std::vector<StmtPtr> else_body;
    bool unroll = false;   // preceded by #pragma unroll
    bool else_if = false;  // else_body is a single `else if`

    Expr::Ref ref = Expr::Ref::Unresolved;  // Assign/Store target kind
    int slot = -1;        // local slot (Decl/Assign/For) or scratch index (Store)
    int block = -1;       // Use: index into Program::blocks
    std::int64_t lo = 0;  // For: resolved constant bounds
    std::int64_t hi = 0;
    bool const_bounds = false;
};

struct ConstDecl {
    std::string name;
    std::int64_t value = 0;
    int line = 0;
};

struct ArrayDecl {
    std::string name;
    std::size_t size = 0;
    int line = 0;
    bool is_state = false;
};

struct BlockDecl {
    std::string name;
    bool is_inline = false;
    int line = 0;
    std::vector<StmtPtr> body;
};

struct ResolveError {
    int line = 0;
    std::string message;
};

/// A parsed policy. Names are resolved at parse time; failures are kept in
/// `resolve_errors` for the verifier to report rather than thrown.
struct Program {
    std::string name;
    std::string source;
    std::vector<ConstDecl> consts;
    std::optional<ArrayDecl> state;
    std::vector<ArrayDecl> scratch;
    /// State and scratch declarations in source order (for stack accounting).
    std::vector<ArrayDecl> arrays;
    std::vector<BlockDecl> blocks;
    std::vector<StmtPtr> body;

    std::vector<Width> slots;            // width of each local slot
    std::vector<std::string> slot_names;
    std::vector<bool> slot_is_loop_var;
    std::vector<ResolveError> resolve_errors;

    std::size_t state_size() const { return state ? state->size : 0; }
};

/// Parses and resolves `text`. Throws ParseError on syntax errors or when
/// the source exceeds 64 KiB.
std::shared_ptr<const Program> parse(const std::string& text, const std::string& name = "policy");

}  // namespace rclab::script
