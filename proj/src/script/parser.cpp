#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "rclab/engine/records.hpp"
#include "rclab/script/ast.hpp"

namespace rclab::script {

ParseError::ParseError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column),
      detail_(message)
{
}

namespace {

// Lexer ------------------------------------------------------------------

struct Token {
    enum class Kind { Ident, Int, Punct, Pragma, End };
    Kind kind = Kind::End;
    std::string text;
    std::int64_t value = 0;
    int line = 1;
    int column = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    std::vector<Token> run()
    {
        std::vector<Token> out;
        while (true) {
            skip_space();
            Token t;
            t.line = line_;
            t.column = col_;
            if (pos_ >= src_.size()) {
                out.push_back(t);
                return out;
            }
            const char c = src_[pos_];
            if (c == '#') {
                lex_pragma(t);
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                t.kind = Token::Kind::Ident;
                while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
                    t.text += advance();
                }
            } else if (std::isdigit(static_cast<unsigned char>(c))) {
                lex_int(t);
            } else {
                lex_punct(t);
            }
            out.push_back(std::move(t));
        }
    }

private:
    char advance()
    {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    bool starts_with(std::string_view s) const { return src_.compare(pos_, s.size(), s) == 0; }

    void skip_space()
    {
        while (pos_ < src_.size()) {
            if (std::isspace(static_cast<unsigned char>(src_[pos_]))) {
                advance();
            } else if (starts_with("//")) {
                while (pos_ < src_.size() && src_[pos_] != '\n') {
                    advance();
                }
            } else if (starts_with("/*")) {
                const int l = line_, c = col_;
                advance();
                advance();
                while (pos_ < src_.size() && !starts_with("*/")) {
                    advance();
                }
                if (pos_ >= src_.size()) {
                    throw ParseError(l, c, "unterminated comment");
                }
                advance();
                advance();
            } else {
                return;
            }
        }
    }

    void lex_pragma(Token& t)
    {
        std::string text;
        while (pos_ < src_.size() && src_[pos_] != '\n') {
            text += advance();
        }
        // Normalize internal whitespace.
        std::string norm;
        bool space = false;
        for (char ch : text) {
            if (std::isspace(static_cast<unsigned char>(ch))) {
                space = true;
                continue;
            }
            if (space && !norm.empty()) {
                norm += ' ';
            }
            space = false;
            norm += ch;
        }
        if (norm == "#pragma unroll" || norm.rfind("#pragma unroll //", 0) == 0) {
            t.kind = Token::Kind::Pragma;
            t.text = "#pragma unroll";
            return;
        }
        throw ParseError(t.line, t.column, "unsupported directive '" + norm + "'");
    }

    void lex_int(Token& t)
    {
        t.kind = Token::Kind::Int;
        std::string digits;
        int base = 10;
        if (starts_with("0x") || starts_with("0X")) {
            advance();
            advance();
            base = 16;
        }
        while (pos_ < src_.size() && std::isxdigit(static_cast<unsigned char>(src_[pos_])) &&
               (base == 16 || std::isdigit(static_cast<unsigned char>(src_[pos_])))) {
            digits += advance();
        }
        if (digits.empty() || (pos_ < src_.size() && (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))) {
            throw ParseError(t.line, t.column, "malformed integer literal");
        }
        try {
            t.value = static_cast<std::int64_t>(std::stoull(digits, nullptr, base));
        } catch (const std::out_of_range&) {
            throw ParseError(t.line, t.column, "integer literal out of range");
        }
        t.text = digits;
    }

    void lex_punct(Token& t)
    {
        static const char* const kTwo[] = {"..", "==", "!=", "<=", ">=", "<<", ">>", "&&", "||"};
        for (const char* p : kTwo) {
            if (starts_with(p)) {
                t.kind = Token::Kind::Punct;
                t.text = p;
                advance();
                advance();
                return;
            }
        }
        const char c = src_[pos_];
        if (std::string_view("+-*/%&|^~!<>=()[]{};,?:.").find(c) == std::string_view::npos) {
            throw ParseError(t.line, t.column, std::string("unexpected character '") + c + "'");
        }
        t.kind = Token::Kind::Punct;
        t.text = std::string(1, advance());
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

// Parser -----------------------------------------------------------------

std::optional<Width> width_of(const std::string& s)
{
    if (s == "u8") return Width::U8;
    if (s == "u16") return Width::U16;
    if (s == "u32") return Width::U32;
    if (s == "u64") return Width::U64;
    if (s == "i64") return Width::I64;
    return std::nullopt;
}

const std::set<std::string> kReserved = {"const", "state",  "scratch", "inline",     "block",  "if",  "else", "for",
                                         "in",    "while",  "use",     "write_rate", "return", "ctx", "u8",   "u16",
                                         "u32",   "u64",    "i64",     "min",        "max",    "clamp"};

class Parser {
public:
    Parser(std::vector<Token> toks, Program& prog) : toks_(std::move(toks)), prog_(prog) {}

    void run()
    {
        while (!at_end()) {
            if (is_ident("const")) {
                parse_const();
            } else if (is_ident("state") || is_ident("scratch")) {
                parse_array();
            } else if (is_ident("inline") || is_ident("block")) {
                parse_block();
            } else {
                prog_.body.push_back(parse_stmt());
            }
        }
    }

private:
    const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
    bool at_end() const { return peek().kind == Token::Kind::End; }
    const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    bool is_ident(std::string_view s, std::size_t ahead = 0) const
    {
        return peek(ahead).kind == Token::Kind::Ident && peek(ahead).text == s;
    }
    bool is_punct(std::string_view s, std::size_t ahead = 0) const
    {
        return peek(ahead).kind == Token::Kind::Punct && peek(ahead).text == s;
    }

    [[noreturn]] void fail(const Token& t, const std::string& msg) const
    {
        throw ParseError(t.line, t.column, msg);
    }

    std::string describe(const Token& t) const
    {
        switch (t.kind) {
        case Token::Kind::End:
            return "end of input";
        case Token::Kind::Pragma:
            return "'#pragma unroll'";
        default:
            return "'" + t.text + "'";
        }
    }

    const Token& expect_punct(std::string_view s)
    {
        if (!is_punct(s)) {
            fail(peek(), "expected '" + std::string(s) + "' but found " + describe(peek()));
        }
        return next();
    }

    const Token& expect_ident(std::string_view what = "identifier")
    {
        if (peek().kind != Token::Kind::Ident) {
            fail(peek(), "expected " + std::string(what) + " but found " + describe(peek()));
        }
        return next();
    }

    std::string expect_name()
    {
        const Token& t = expect_ident();
        if (kReserved.count(t.text) != 0) {
            fail(t, "'" + t.text + "' is a reserved word");
        }
        return t.text;
    }

    /// Statement terminator; may be omitted before '}' or end of input.
    void end_stmt()
    {
        if (is_punct(";")) {
            next();
            return;
        }
        if (is_punct("}") || at_end()) {
            return;
        }
        fail(peek(), "expected ';' but found " + describe(peek()));
    }

    void parse_const()
    {
        const int line = next().line;
        ConstDecl c;
        c.line = line;
        c.name = expect_name();
        expect_punct("=");
        bool neg = false;
        if (is_punct("-")) {
            next();
            neg = true;
        }
        const Token& v = peek();
        if (v.kind == Token::Kind::Int) {
            c.value = v.value;
        } else if (v.kind == Token::Kind::Ident) {
            const auto it = std::find_if(prog_.consts.begin(), prog_.consts.end(),
                                         [&](const ConstDecl& d) { return d.name == v.text; });
            if (it == prog_.consts.end()) {
                fail(v, "constant initializer must be an integer or an earlier constant");
            }
            c.value = it->value;
        } else {
            fail(v, "constant initializer must be an integer or an earlier constant");
        }
        next();
        if (neg) {
            c.value = static_cast<std::int64_t>(0ULL - static_cast<std::uint64_t>(c.value));
        }
        end_stmt();
        prog_.consts.push_back(std::move(c));
    }

    void parse_array()
    {
        const Token& kw = next();
        ArrayDecl a;
        a.is_state = kw.text == "state";
        a.line = kw.line;
        a.name = expect_name();
        expect_punct("[");
        const Token& n = peek();
        if (n.kind != Token::Kind::Int || n.value <= 0) {
            fail(n, "array length must be a positive integer literal");
        }
        a.size = static_cast<std::size_t>(n.value);
        next();
        expect_punct("]");
        end_stmt();
        if (a.is_state) {
            if (prog_.state) {
                fail(kw, "only one state array may be declared");
            }
            prog_.state = a;
        } else {
            prog_.scratch.push_back(a);
        }
        prog_.arrays.push_back(std::move(a));
    }

    void parse_block()
    {
        BlockDecl b;
        b.line = peek().line;
        if (is_ident("inline")) {
            b.is_inline = true;
            next();
        }
        if (!is_ident("block")) {
            fail(peek(), "expected 'block' after 'inline'");
        }
        next();
        b.name = expect_name();
        b.body = parse_body();
        prog_.blocks.push_back(std::move(b));
    }

    std::vector<StmtPtr> parse_body()
    {
        expect_punct("{");
        std::vector<StmtPtr> out;
        while (!is_punct("}")) {
            if (at_end()) {
                fail(peek(), "missing '}'");
            }
            if (is_ident("const") || is_ident("state") || is_ident("scratch") || is_ident("block") ||
                is_ident("inline")) {
                fail(peek(), "declarations are only allowed at top level");
            }
            out.push_back(parse_stmt());
        }
        next();
        return out;
    }

    StmtPtr parse_stmt()
    {
        auto s = std::make_unique<Stmt>();
        const Token& t = peek();
        s->line = t.line;

        if (t.kind == Token::Kind::Pragma) {
            next();
            if (!is_ident("for") && !is_ident("while")) {
                fail(peek(), "'#pragma unroll' must precede a loop");
            }
            StmtPtr loop = parse_stmt();
            loop->unroll = true;
            return loop;
        }
        if (t.kind != Token::Kind::Ident) {
            fail(t, "expected a statement but found " + describe(t));
        }
        if (const auto w = width_of(t.text); w && peek(1).kind == Token::Kind::Ident) {
            next();
            s->kind = Stmt::Kind::Decl;
            s->width = *w;
            s->name = expect_name();
            expect_punct("=");
            s->value = parse_expr();
            end_stmt();
            return s;
        }
        if (t.text == "if") {
            return parse_if();
        }
        if (t.text == "for") {
            next();
            s->kind = Stmt::Kind::For;
            s->name = expect_name();
            if (!is_ident("in")) {
                fail(peek(), "expected 'in' in for loop");
            }
            next();
            s->index = parse_expr();
            expect_punct("..");
            s->value = parse_expr();
            s->body = parse_body();
            return s;
        }
        if (t.text == "while") {
            next();
            s->kind = Stmt::Kind::While;
            expect_punct("(");
            s->value = parse_expr();
            expect_punct(")");
            s->body = parse_body();
            return s;
        }
        if (t.text == "use") {
            next();
            s->kind = Stmt::Kind::Use;
            s->name = expect_name();
            end_stmt();
            return s;
        }
        if (t.text == "write_rate") {
            next();
            s->kind = Stmt::Kind::WriteRate;
            expect_punct("(");
            s->value = parse_expr();
            expect_punct(")");
            end_stmt();
            return s;
        }
        if (t.text == "return") {
            next();
            s->kind = Stmt::Kind::Return;
            end_stmt();
            return s;
        }
        if (t.text == "else") {
            fail(t, "'else' without a matching 'if'");
        }
        s->name = expect_name();
        if (is_punct("[")) {
            next();
            s->kind = Stmt::Kind::Store;
            s->index = parse_expr();
            expect_punct("]");
        } else {
            s->kind = Stmt::Kind::Assign;
        }
        expect_punct("=");
        s->value = parse_expr();
        end_stmt();
        return s;
    }

    StmtPtr parse_if()
    {
        auto s = std::make_unique<Stmt>();
        s->kind = Stmt::Kind::If;
        s->line = next().line;
        expect_punct("(");
        s->value = parse_expr();
        expect_punct(")");
        s->body = parse_body();
        if (is_ident("else")) {
            next();
            if (is_ident("if")) {
                s->else_if = true;
                s->else_body.push_back(parse_if());
            } else {
                s->else_body = parse_body();
            }
        }
        return s;
    }

    // Expressions, lowest precedence first.

    ExprPtr make(Expr::Kind k, int line)
    {
        auto e = std::make_unique<Expr>();
        e->kind = k;
        e->line = line;
        return e;
    }

    ExprPtr parse_expr() { return parse_ternary(); }

    ExprPtr parse_ternary()
    {
        ExprPtr cond = parse_binary(0);
        if (!is_punct("?")) {
            return cond;
        }
        auto e = make(Expr::Kind::Ternary, next().line);
        e->args.push_back(std::move(cond));
        e->args.push_back(parse_expr());
        expect_punct(":");
        e->args.push_back(parse_ternary());
        return e;
    }

    static int precedence(const std::string& op)
    {
        static const std::map<std::string, int> kPrec = {
            {"||", 1}, {"&&", 2}, {"|", 3},  {"^", 4},  {"&", 5},  {"==", 6}, {"!=", 6}, {"<", 7},
            {"<=", 7}, {">", 7},  {">=", 7}, {"<<", 8}, {">>", 8}, {"+", 9},  {"-", 9},  {"*", 10},
            {"/", 10}, {"%", 10},
        };
        const auto it = kPrec.find(op);
        return it == kPrec.end() ? -1 : it->second;
    }

    ExprPtr parse_binary(int min_prec)
    {
        ExprPtr lhs = parse_unary();
        while (peek().kind == Token::Kind::Punct) {
            const std::string op = peek().text;
            const int prec = precedence(op);
            if (prec < 0 || prec <= min_prec) {
                break;
            }
            const int line = next().line;
            ExprPtr rhs = parse_binary(prec);
            auto e = make(Expr::Kind::Binary, line);
            e->op = op;
            e->args.push_back(std::move(lhs));
            e->args.push_back(std::move(rhs));
            lhs = std::move(e);
        }
        return lhs;
    }

    ExprPtr parse_unary()
    {
        if (is_punct("!") || is_punct("-") || is_punct("~")) {
            const Token& t = next();
            auto e = make(Expr::Kind::Unary, t.line);
            e->op = t.text;
            e->args.push_back(parse_unary());
            return e;
        }
        return parse_primary();
    }

    ExprPtr parse_primary()
    {
        const Token& t = peek();
        if (t.kind == Token::Kind::Int) {
            next();
            auto e = make(Expr::Kind::Int, t.line);
            e->value = t.value;
            return e;
        }
        if (is_punct("(")) {
            next();
            ExprPtr inner = parse_expr();
            expect_punct(")");
            return inner;
        }
        if (t.kind != Token::Kind::Ident) {
            fail(t, "expected an expression but found " + describe(t));
        }
        next();
        if (t.text == "ctx") {
            expect_punct(".");
            auto e = make(Expr::Kind::Ctx, t.line);
            e->name = expect_ident("context field").text;
            return e;
        }
        if (is_punct("(")) {
            next();
            const bool is_cast = width_of(t.text).has_value();
            auto e = make(is_cast ? Expr::Kind::Cast : Expr::Kind::Call, t.line);
            e->name = t.text;
            if (is_cast) {
                e->cast = *width_of(t.text);
            }
            if (!is_punct(")")) {
                e->args.push_back(parse_expr());
                while (is_punct(",")) {
                    next();
                    e->args.push_back(parse_expr());
                }
            }
            expect_punct(")");
            return e;
        }
        if (kReserved.count(t.text) != 0) {
            fail(t, "unexpected keyword '" + t.text + "' in expression");
        }
        if (is_punct("[")) {
            next();
            auto e = make(Expr::Kind::Index, t.line);
            e->name = t.text;
            e->args.push_back(parse_expr());
            expect_punct("]");
            return e;
        }
        auto e = make(Expr::Kind::Name, t.line);
        e->name = t.text;
        return e;
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    Program& prog_;
};

// Name resolution --------------------------------------------------------

class Resolver {
public:
    explicit Resolver(Program& p) : p_(p) {}

    void run()
    {
        for (const auto& c : p_.consts) {
            declare_global(c.name, c.line);
        }
        for (const auto& a : p_.arrays) {
            declare_global(a.name, a.line);
        }
        for (std::size_t i = 0; i < p_.blocks.size(); ++i) {
            if (blocks_.count(p_.blocks[i].name) != 0) {
                error(p_.blocks[i].line, "block '" + p_.blocks[i].name + "' defined twice");
            }
            blocks_[p_.blocks[i].name] = static_cast<int>(i);
        }
        for (auto& b : p_.blocks) {
            scopes_.assign(1, {});
            resolve_body(b.body);
        }
        scopes_.assign(1, {});
        resolve_body(p_.body);
    }

private:
    void error(int line, std::string msg) { p_.resolve_errors.push_back({line, std::move(msg)}); }

    void declare_global(const std::string& name, int line)
    {
        if (!globals_.insert(name).second) {
            error(line, "'" + name + "' declared twice");
        }
    }

    const ConstDecl* find_const(const std::string& n) const
    {
        for (const auto& c : p_.consts) {
            if (c.name == n) return &c;
        }
        return nullptr;
    }

    /// Returns -1 for the state array, the scratch index otherwise, or -2.
    int find_array(const std::string& n) const
    {
        if (p_.state && p_.state->name == n) {
            return -1;
        }
        for (std::size_t i = 0; i < p_.scratch.size(); ++i) {
            if (p_.scratch[i].name == n) return static_cast<int>(i);
        }
        return -2;
    }

    int find_local(const std::string& n) const
    {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            const auto f = it->find(n);
            if (f != it->end()) return f->second;
        }
        return -1;
    }

    int new_slot(const std::string& name, Width w, bool loop_var, int line)
    {
        if (scopes_.back().count(name) != 0) {
            error(line, "'" + name + "' redeclared in the same scope");
        } else if (globals_.count(name) != 0) {
            error(line, "'" + name + "' shadows a global declaration");
        }
        const int slot = static_cast<int>(p_.slots.size());
        p_.slots.push_back(w);
        p_.slot_names.push_back(name);
        p_.slot_is_loop_var.push_back(loop_var);
        scopes_.back()[name] = slot;
        return slot;
    }

    void resolve_body(std::vector<StmtPtr>& body)
    {
        scopes_.emplace_back();
        for (auto& s : body) {
            resolve_stmt(*s);
        }
        scopes_.pop_back();
    }

    std::optional<std::int64_t> const_value(const Expr& e) const
    {
        switch (e.kind) {
        case Expr::Kind::Int:
            return e.value;
        case Expr::Kind::Name:
            if (e.ref == Expr::Ref::Const) return e.value;
            return std::nullopt;
        case Expr::Kind::Unary:
            if (e.op == "-") {
                if (auto v = const_value(*e.args[0])) return -*v;
            }
            return std::nullopt;
        case Expr::Kind::Binary: {
            const auto a = const_value(*e.args[0]);
            const auto b = const_value(*e.args[1]);
            if (!a || !b) return std::nullopt;
            if (e.op == "+") return *a + *b;
            if (e.op == "-") return *a - *b;
            if (e.op == "*") return *a * *b;
            return std::nullopt;
        }
        default:
            return std::nullopt;
        }
    }

    void resolve_stmt(Stmt& s)
    {
        switch (s.kind) {
        case Stmt::Kind::Decl:
            resolve_expr(*s.value);
            s.ref = Expr::Ref::Local;
            s.slot = new_slot(s.name, s.width, false, s.line);
            break;
        case Stmt::Kind::Assign: {
            resolve_expr(*s.value);
            const int slot = find_local(s.name);
            if (slot >= 0) {
                if (p_.slot_is_loop_var[static_cast<std::size_t>(slot)]) {
                    error(s.line, "loop variable '" + s.name + "' is read-only");
                }
                s.ref = Expr::Ref::Local;
                s.slot = slot;
            } else if (find_const(s.name) != nullptr) {
                error(s.line, "cannot assign to constant '" + s.name + "'");
            } else if (find_array(s.name) != -2) {
                error(s.line, "array '" + s.name + "' needs an index");
            } else {
                error(s.line, "undeclared identifier '" + s.name + "'");
            }
            break;
        }
        case Stmt::Kind::Store: {
            resolve_expr(*s.index);
            resolve_expr(*s.value);
            const int a = find_array(s.name);
            if (a == -1) {
                s.ref = Expr::Ref::State;
            } else if (a >= 0) {
                s.ref = Expr::Ref::Scratch;
                s.slot = a;
            } else {
                error(s.line, "'" + s.name + "' is not an array");
            }
            break;
        }
        case Stmt::Kind::If:
            resolve_expr(*s.value);
            resolve_body(s.body);
            resolve_body(s.else_body);
            break;
        case Stmt::Kind::For: {
            resolve_expr(*s.index);
            resolve_expr(*s.value);
            const auto lo = const_value(*s.index);
            const auto hi = const_value(*s.value);
            s.const_bounds = lo.has_value() && hi.has_value();
            s.lo = lo.value_or(0);
            s.hi = hi.value_or(0);
            scopes_.emplace_back();
            s.ref = Expr::Ref::Local;
            s.slot = new_slot(s.name, Width::I64, true, s.line);
            resolve_body(s.body);
            scopes_.pop_back();
            break;
        }
        case Stmt::Kind::While:
            resolve_expr(*s.value);
            resolve_body(s.body);
            break;
        case Stmt::Kind::Use: {
            const auto it = blocks_.find(s.name);
            if (it == blocks_.end()) {
                error(s.line, "unknown block '" + s.name + "'");
            } else {
                s.block = it->second;
            }
            break;
        }
        case Stmt::Kind::WriteRate:
            resolve_expr(*s.value);
            break;
        case Stmt::Kind::Return:
            break;
        }
    }

    static ValType join(ValType a, ValType b) { return a == ValType::U64 || b == ValType::U64 ? ValType::U64 : ValType::I64; }

    void resolve_expr(Expr& e)
    {
        for (auto& a : e.args) {
            resolve_expr(*a);
        }
        switch (e.kind) {
        case Expr::Kind::Int:
            e.type = ValType::I64;
            break;
        case Expr::Kind::Name: {
            const int slot = find_local(e.name);
            if (slot >= 0) {
                e.ref = Expr::Ref::Local;
                e.slot = slot;
                e.type = p_.slots[static_cast<std::size_t>(slot)] == Width::U64 ? ValType::U64 : ValType::I64;
            } else if (const ConstDecl* c = find_const(e.name)) {
                e.ref = Expr::Ref::Const;
                e.value = c->value;
            } else if (find_array(e.name) != -2) {
                error(e.line, "array '" + e.name + "' needs an index");
            } else {
                error(e.line, "undeclared identifier '" + e.name + "'");
            }
            break;
        }
        case Expr::Kind::Ctx: {
            const auto& names = kTxContextFieldNames;
            const auto it = std::find_if(names.begin(), names.end(), [&](const char* n) { return e.name == n; });
            if (it == names.end()) {
                error(e.line, "unknown context field '" + e.name + "'");
            } else {
                e.slot = static_cast<int>(it - names.begin());
                e.type = (e.slot == TxStatusContext::Signal || e.slot == TxStatusContext::AckSignal) ? ValType::I64
                                                                                                      : ValType::U64;
            }
            break;
        }
        case Expr::Kind::Index: {
            const int a = find_array(e.name);
            if (a == -1) {
                e.ref = Expr::Ref::State;
            } else if (a >= 0) {
                e.ref = Expr::Ref::Scratch;
                e.slot = a;
            } else {
                error(e.line, "'" + e.name + "' is not an array");
            }
            e.type = ValType::I64;
            break;
        }
        case Expr::Kind::Unary:
            e.type = e.op == "!" ? ValType::I64 : e.args[0]->type;
            break;
        case Expr::Kind::Binary: {
            static const std::set<std::string> kBool = {"==", "!=", "<", "<=", ">", ">=", "&&", "||"};
            if (kBool.count(e.op) != 0) {
                e.type = ValType::I64;
            } else if (e.op == "<<" || e.op == ">>") {
                e.type = e.args[0]->type;
            } else {
                e.type = join(e.args[0]->type, e.args[1]->type);
            }
            break;
        }
        case Expr::Kind::Ternary:
            e.type = join(e.args[1]->type, e.args[2]->type);
            break;
        case Expr::Kind::Call: {
            const std::size_t n = e.args.size();
            const bool ok = ((e.name == "min" || e.name == "max") && n == 2) || (e.name == "clamp" && (n == 2 || n == 3));
            if (!ok) {
                error(e.line, "unknown function '" + e.name + "' with " + std::to_string(n) + " argument(s)");
            }
            e.type = ValType::I64;
            for (const auto& a : e.args) {
                e.type = join(e.type, a->type);
            }
            break;
        }
        case Expr::Kind::Cast:
            if (e.args.size() != 1) {
                error(e.line, "cast takes exactly one argument");
            }
            e.type = e.cast == Width::U64 ? ValType::U64 : ValType::I64;
            break;
        }
    }

    Program& p_;
    std::set<std::string> globals_;
    std::map<std::string, int> blocks_;
    std::vector<std::map<std::string, int>> scopes_;
};

}  // namespace

std::shared_ptr<const Program> parse(const std::string& text, const std::string& name)
{
    if (text.size() > kMaxSourceBytes) {
        throw ParseError(1, 1, "source exceeds " + std::to_string(kMaxSourceBytes) + " bytes");
    }
    auto prog = std::make_shared<Program>();
    prog->name = name;
    prog->source = text;
    Parser(Lexer(text).run(), *prog).run();
    Resolver(*prog).run();
    return prog;
}

}  // namespace rclab::script
