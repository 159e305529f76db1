#include "cgnn/js/parser.hpp"

#include <utility>

#include "js/lexer.hpp"

namespace cgnn::js {

namespace {

bool is_assign_op(std::string_view op) {
  static constexpr std::string_view kOps[] = {
      "=",  "+=",  "-=",  "*=",   "/=",  "%=",  "**=", "<<=",
      ">>=", ">>>=", "&=", "|=",  "^=",  "&&=", "||=", "?\?="};
  for (auto o : kOps)
    if (o == op) return true;
  return false;
}

int binary_precedence(const Token& t, bool no_in) {
  if (t.type == Tok::kName && !t.escaped) {
    if (t.value == "instanceof") return 7;
    if (t.value == "in" && !no_in) return 7;
    return 0;
  }
  if (t.type != Tok::kPunct) return 0;
  const std::string& v = t.value;
  if (v == "??") return 1;
  if (v == "||") return 1;
  if (v == "&&") return 2;
  if (v == "|") return 3;
  if (v == "^") return 4;
  if (v == "&") return 5;
  if (v == "==" || v == "!=" || v == "===" || v == "!==") return 6;
  if (v == "<" || v == ">" || v == "<=" || v == ">=") return 7;
  if (v == "<<" || v == ">>" || v == ">>>") return 8;
  if (v == "+" || v == "-") return 9;
  if (v == "*" || v == "/" || v == "%") return 10;
  if (v == "**") return 11;
  return 0;
}

std::optional<std::string> callee_name(const AstNode& callee) {
  if (callee.kind == "Identifier") return callee.name;
  if (callee.kind == "MemberExpression" && !callee.computed &&
      callee.children.size() == 2)
    return callee.children[1].name;
  return std::nullopt;
}

struct FnCtx {
  bool in_function = false;
  bool is_async = false;
  bool is_generator = false;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src), lex_(src) {
    tok_ = lex_.next();
  }

  AstNode program() {
    AstNode p;
    p.kind = "Program";
    p.start = 0;
    while (tok_.type != Tok::kEof) p.children.push_back(statement());
    p.end = static_cast<uint32_t>(src_.size());
    return p;
  }

 private:
  // ---- token plumbing -------------------------------------------------

  bool is(std::string_view punct) const {
    return tok_.type == Tok::kPunct && tok_.value == punct;
  }
  bool is_name(std::string_view word) const {
    return tok_.type == Tok::kName && !tok_.escaped && tok_.value == word;
  }
  static bool tok_is(const Token& t, std::string_view punct) {
    return t.type == Tok::kPunct && t.value == punct;
  }
  void next() {
    prev_end_ = tok_.end;
    tok_ = lex_.next();
  }
  bool eat(std::string_view punct) {
    if (!is(punct)) return false;
    next();
    return true;
  }
  bool eat_name(std::string_view word) {
    if (!is_name(word)) return false;
    next();
    return true;
  }
  void expect(std::string_view punct) {
    if (!eat(punct)) unexpected("expected '" + std::string(punct) + "'");
  }
  void expect_name(std::string_view word) {
    if (!eat_name(word)) unexpected("expected '" + std::string(word) + "'");
  }
  Token peek() {
    const uint32_t save = lex_.pos();
    Token t = lex_.next();
    lex_.reset(save);
    return t;
  }
  // Second token is only scanned when the first is a name, so the scan
  // never runs into template or regex text it cannot classify.
  std::pair<Token, Token> peek2() {
    const uint32_t save = lex_.pos();
    Token a = lex_.next();
    Token b;
    if (a.type == Tok::kName) b = lex_.next();
    lex_.reset(save);
    return {a, b};
  }

  // `await` outside any function is treated as a module top-level await
  // when an operand follows on the same line.
  bool top_level_await() {
    if (ctx_.in_function || !is_name("await")) return false;
    Token p = peek();
    if (p.nl_before) return false;
    switch (p.type) {
      case Tok::kName:
        return p.value != "in" && p.value != "instanceof" && p.value != "of";
      case Tok::kNum:
      case Tok::kString:
      case Tok::kBacktick:
      case Tok::kPrivateName:
        return true;
      case Tok::kPunct:
        return p.value == "(" || p.value == "[" || p.value == "{" ||
               p.value == "!" || p.value == "~" || p.value == "++" ||
               p.value == "--";
      default:
        return false;
    }
  }
  [[noreturn]] void unexpected(const std::string& msg = "unexpected token") {
    std::string got = tok_.type == Tok::kEof ? "end of input"
                                             : "'" + tok_.value + "'";
    if (tok_.type == Tok::kString || tok_.type == Tok::kNum)
      got = "literal";
    lex_.fail(msg + ", got " + got, tok_.start);
  }
  bool can_insert_semicolon() const {
    return tok_.type == Tok::kEof || is("}") || tok_.nl_before;
  }
  void semicolon() {
    if (eat(";")) return;
    if (!can_insert_semicolon()) unexpected("expected ';'");
  }

  AstNode start_node(std::string kind) const {
    AstNode n;
    n.kind = std::move(kind);
    n.start = tok_.start;
    return n;
  }
  static AstNode start_at(std::string kind, uint32_t start) {
    AstNode n;
    n.kind = std::move(kind);
    n.start = start;
    return n;
  }
  AstNode finish(AstNode n) const {
    n.end = prev_end_;
    return n;
  }

  // ---- statements -----------------------------------------------------

  AstNode statement() {
    if (tok_.type == Tok::kPunct) {
      if (is("{")) return block();
      if (is(";")) {
        AstNode n = start_node("EmptyStatement");
        next();
        return finish(std::move(n));
      }
    }
    if (tok_.type == Tok::kName && !tok_.escaped) {
      const std::string w = tok_.value;
      const uint32_t start = tok_.start;
      if (w == "var" || w == "const") {
        AstNode d = var_declaration(false);
        semicolon();
        d.end = prev_end_;
        return d;
      }
      if (w == "let" && let_starts_declaration()) {
        AstNode d = var_declaration(false);
        semicolon();
        d.end = prev_end_;
        return d;
      }
      if (w == "function") return function_node(true, false, start, false);
      if (w == "async") {
        Token p = peek();
        if (p.type == Tok::kName && p.value == "function" && !p.nl_before) {
          next();
          return function_node(true, true, start, false);
        }
      }
      if (w == "class") return class_node(true, false);
      if (w == "if") return if_statement();
      if (w == "for") return for_statement();
      if (w == "while") {
        AstNode n = start_node("WhileStatement");
        next();
        n.children.push_back(paren_expression());
        n.children.push_back(statement());
        return finish(std::move(n));
      }
      if (w == "do") {
        AstNode n = start_node("DoWhileStatement");
        next();
        n.children.push_back(statement());
        expect_name("while");
        n.children.push_back(paren_expression());
        eat(";");
        return finish(std::move(n));
      }
      if (w == "return") {
        AstNode n = start_node("ReturnStatement");
        next();
        if (!is(";") && !can_insert_semicolon())
          n.children.push_back(expression(false));
        semicolon();
        return finish(std::move(n));
      }
      if (w == "break" || w == "continue") {
        AstNode n = start_node(w == "break" ? "BreakStatement"
                                            : "ContinueStatement");
        next();
        if (tok_.type == Tok::kName && !tok_.nl_before &&
            !is_reserved_word(tok_.value))
          n.children.push_back(identifier());
        semicolon();
        return finish(std::move(n));
      }
      if (w == "throw") {
        AstNode n = start_node("ThrowStatement");
        next();
        if (tok_.nl_before) unexpected("illegal newline after throw");
        n.children.push_back(expression(false));
        semicolon();
        return finish(std::move(n));
      }
      if (w == "try") return try_statement();
      if (w == "switch") return switch_statement();
      if (w == "with") {
        AstNode n = start_node("WithStatement");
        next();
        n.children.push_back(paren_expression());
        n.children.push_back(statement());
        return finish(std::move(n));
      }
      if (w == "debugger") {
        AstNode n = start_node("DebuggerStatement");
        next();
        semicolon();
        return finish(std::move(n));
      }
      if (w == "import") {
        Token p = peek();
        if (!tok_is(p, "(") && !tok_is(p, ".")) return import_declaration();
      }
      if (w == "export") return export_declaration();
      if (!is_reserved_word(w)) {
        Token p = peek();
        if (tok_is(p, ":")) {
          AstNode n = start_node("LabeledStatement");
          n.children.push_back(identifier());
          next();  // ':'
          n.children.push_back(statement());
          return finish(std::move(n));
        }
      }
    }
    AstNode n = start_node("ExpressionStatement");
    n.children.push_back(expression(false));
    semicolon();
    return finish(std::move(n));
  }

  bool let_starts_declaration() {
    Token p = peek();
    if (p.type == Tok::kName)
      return p.value != "in" && p.value != "instanceof" && p.value != "of";
    return tok_is(p, "[") || tok_is(p, "{");
  }

  AstNode block() {
    AstNode n = start_node("BlockStatement");
    expect("{");
    while (!is("}")) {
      if (tok_.type == Tok::kEof) unexpected("unterminated block");
      n.children.push_back(statement());
    }
    next();
    return finish(std::move(n));
  }

  AstNode paren_expression() {
    expect("(");
    AstNode e = expression(false);
    expect(")");
    return e;
  }

  AstNode var_declaration(bool no_in) {
    AstNode n = start_node("VariableDeclaration");
    next();
    do {
      AstNode d = start_node("VariableDeclarator");
      d.children.push_back(binding_target());
      if (eat("=")) d.children.push_back(assign(no_in));
      n.children.push_back(finish(std::move(d)));
    } while (eat(","));
    return finish(std::move(n));
  }

  AstNode if_statement() {
    AstNode n = start_node("IfStatement");
    next();
    n.children.push_back(paren_expression());
    n.children.push_back(statement());
    if (eat_name("else")) n.children.push_back(statement());
    return finish(std::move(n));
  }

  AstNode for_statement() {
    AstNode n = start_node("ForStatement");
    next();
    eat_name("await");
    expect("(");
    if (!is(";")) {
      AstNode init;
      bool is_decl = false;
      if (is_name("var") || is_name("const") ||
          (is_name("let") && let_starts_declaration())) {
        init = var_declaration(true);
        is_decl = true;
      } else {
        init = expression(true);
      }
      if (is_name("of") || is_name("in")) {
        const bool of = is_name("of");
        n.kind = of ? "ForOfStatement" : "ForInStatement";
        next();
        n.children.push_back(is_decl ? std::move(init)
                                     : to_pattern(std::move(init)));
        n.children.push_back(of ? assign(false) : expression(false));
        expect(")");
        n.children.push_back(statement());
        return finish(std::move(n));
      }
      n.children.push_back(std::move(init));
    }
    expect(";");
    if (!is(";")) n.children.push_back(expression(false));
    expect(";");
    if (!is(")")) n.children.push_back(expression(false));
    expect(")");
    n.children.push_back(statement());
    return finish(std::move(n));
  }

  AstNode try_statement() {
    AstNode n = start_node("TryStatement");
    next();
    n.children.push_back(block());
    if (is_name("catch")) {
      AstNode c = start_node("CatchClause");
      next();
      if (eat("(")) {
        c.children.push_back(binding_target());
        expect(")");
      }
      c.children.push_back(block());
      n.children.push_back(finish(std::move(c)));
    }
    if (eat_name("finally")) n.children.push_back(block());
    if (n.children.size() == 1) unexpected("missing catch or finally");
    return finish(std::move(n));
  }

  AstNode switch_statement() {
    AstNode n = start_node("SwitchStatement");
    next();
    n.children.push_back(paren_expression());
    expect("{");
    while (!eat("}")) {
      AstNode c = start_node("SwitchCase");
      if (eat_name("case")) {
        c.children.push_back(expression(false));
      } else {
        expect_name("default");
      }
      expect(":");
      while (!is("}") && !is_name("case") && !is_name("default")) {
        if (tok_.type == Tok::kEof) unexpected("unterminated switch");
        c.children.push_back(statement());
      }
      n.children.push_back(finish(std::move(c)));
    }
    return finish(std::move(n));
  }

  AstNode module_source() {
    if (tok_.type != Tok::kString) unexpected("expected module specifier");
    AstNode s = start_node("Literal");
    next();
    s = finish(std::move(s));
    // Import attributes: `with { type: "json" }`.
    if ((is_name("with") || is_name("assert")) && !tok_.nl_before) {
      next();
      object_literal();
    }
    return s;
  }

  AstNode module_export_name() {
    if (tok_.type == Tok::kString) {
      AstNode s = start_node("Literal");
      next();
      return finish(std::move(s));
    }
    return property_identifier();
  }

  AstNode import_declaration() {
    AstNode n = start_node("ImportDeclaration");
    next();
    if (tok_.type == Tok::kString) {
      n.children.push_back(module_source());
      semicolon();
      return finish(std::move(n));
    }
    if (tok_.type == Tok::kName) {
      AstNode s = start_node("ImportDefaultSpecifier");
      s.children.push_back(identifier());
      n.children.push_back(finish(std::move(s)));
      if (!eat(",")) goto from;
    }
    if (is("*")) {
      AstNode s = start_node("ImportNamespaceSpecifier");
      next();
      expect_name("as");
      s.children.push_back(identifier());
      n.children.push_back(finish(std::move(s)));
    } else if (eat("{")) {
      while (!eat("}")) {
        AstNode s = start_node("ImportSpecifier");
        s.children.push_back(module_export_name());
        if (eat_name("as")) s.children.push_back(identifier());
        n.children.push_back(finish(std::move(s)));
        if (!is("}")) expect(",");
      }
    }
  from:
    expect_name("from");
    n.children.push_back(module_source());
    semicolon();
    return finish(std::move(n));
  }

  AstNode export_declaration() {
    const uint32_t start = tok_.start;
    next();
    if (is_name("default")) {
      AstNode n = start_at("ExportDefaultDeclaration", start);
      next();
      const uint32_t s = tok_.start;
      if (is_name("function")) {
        n.children.push_back(function_node(true, false, s, true));
      } else if (is_name("async") && peek().value == "function" &&
                 !peek().nl_before) {
        next();
        n.children.push_back(function_node(true, true, s, true));
      } else if (is_name("class")) {
        n.children.push_back(class_node(true, true));
      } else {
        n.children.push_back(assign(false));
        semicolon();
      }
      return finish(std::move(n));
    }
    if (is("*")) {
      AstNode n = start_at("ExportAllDeclaration", start);
      next();
      if (eat_name("as")) n.children.push_back(module_export_name());
      expect_name("from");
      n.children.push_back(module_source());
      semicolon();
      return finish(std::move(n));
    }
    AstNode n = start_at("ExportNamedDeclaration", start);
    if (eat("{")) {
      while (!eat("}")) {
        AstNode s = start_node("ExportSpecifier");
        s.children.push_back(module_export_name());
        if (eat_name("as")) s.children.push_back(module_export_name());
        n.children.push_back(finish(std::move(s)));
        if (!is("}")) expect(",");
      }
      if (eat_name("from")) n.children.push_back(module_source());
      semicolon();
      return finish(std::move(n));
    }
    n.children.push_back(statement());
    return finish(std::move(n));
  }

  // ---- functions and classes -----------------------------------------

  // tok_ is at `function`; start may point at a preceding `async`.
  AstNode function_node(bool statement, bool is_async, uint32_t start,
                        bool allow_anonymous) {
    AstNode n = start_at(
        statement ? "FunctionDeclaration" : "FunctionExpression", start);
    next();
    const bool gen = eat("*");
    if (tok_.type == Tok::kName) {
      AstNode id = identifier();
      n.ref_name = id.name;
      n.children.push_back(std::move(id));
    } else if (statement && !allow_anonymous) {
      unexpected("function name required");
    }
    function_rest(n, is_async, gen);
    return n;
  }

  // Parameters and body. tok_ is at `(`.
  void function_rest(AstNode& n, bool is_async, bool gen) {
    const FnCtx saved = ctx_;
    ctx_ = FnCtx{true, is_async, gen};
    expect("(");
    int count = 0;
    while (!is(")")) {
      n.children.push_back(binding_element());
      ++count;
      if (!is(")")) expect(",");
    }
    next();
    n.arity = count;
    n.children.push_back(function_body(&n.body_insert));
    ctx_ = saved;
    n.end = prev_end_;
  }

  static bool is_directive(const AstNode& s, std::string_view src) {
    if (s.kind != "ExpressionStatement" || s.children.size() != 1) return false;
    const AstNode& e = s.children[0];
    return e.kind == "Literal" && (src[e.start] == '"' || src[e.start] == '\'');
  }

  AstNode function_body(std::optional<uint32_t>* insert) {
    AstNode b = start_node("BlockStatement");
    expect("{");
    uint32_t at = prev_end_;
    bool prologue = true;
    while (!is("}")) {
      if (tok_.type == Tok::kEof) unexpected("unterminated function body");
      AstNode s = statement();
      if (prologue && is_directive(s, src_)) {
        at = s.end;
      } else {
        prologue = false;
      }
      b.children.push_back(std::move(s));
    }
    next();
    *insert = at;
    return finish(std::move(b));
  }

  AstNode arrow_function(uint32_t start, std::vector<AstNode> params,
                         bool is_async, bool no_in) {
    AstNode n = start_at("ArrowFunctionExpression", start);
    expect("=>");
    n.arity = static_cast<int>(params.size());
    for (auto& p : params) n.children.push_back(to_pattern(std::move(p)));
    const FnCtx saved = ctx_;
    ctx_ = FnCtx{true, is_async, false};
    if (is("{")) {
      n.children.push_back(function_body(&n.body_insert));
    } else {
      n.children.push_back(assign(no_in));
    }
    ctx_ = saved;
    return finish(std::move(n));
  }

  AstNode class_node(bool statement, bool allow_anonymous) {
    AstNode n = start_node(statement ? "ClassDeclaration" : "ClassExpression");
    next();
    if (tok_.type == Tok::kName && !is_name("extends")) {
      AstNode id = identifier();
      n.ref_name = id.name;
      n.children.push_back(std::move(id));
    } else if (statement && !allow_anonymous) {
      unexpected("class name required");
    }
    if (eat_name("extends")) {
      const uint32_t s = tok_.start;
      n.children.push_back(subscripts(s, atom(), false));
    }
    AstNode body = start_node("ClassBody");
    expect("{");
    while (!eat("}")) {
      if (tok_.type == Tok::kEof) unexpected("unterminated class body");
      if (eat(";")) continue;
      body.children.push_back(class_member());
    }
    n.children.push_back(finish(std::move(body)));
    return finish(std::move(n));
  }

  // True when the token after a modifier word begins a member name.
  bool modifier_applies() {
    Token p = peek();
    if (p.nl_before) return false;
    if (p.type == Tok::kPunct)
      return p.value == "[" || p.value == "*" || p.value == "{";
    return p.type == Tok::kName || p.type == Tok::kString ||
           p.type == Tok::kNum || p.type == Tok::kPrivateName;
  }

  AstNode class_member() {
    const uint32_t start = tok_.start;
    if (is_name("static")) {
      Token p = peek();
      if (tok_is(p, "{")) {
        AstNode sb = start_node("StaticBlock");
        next();
        const FnCtx saved = ctx_;
        ctx_ = FnCtx{true, false, false};
        next();
        while (!is("}")) {
          if (tok_.type == Tok::kEof) unexpected("unterminated static block");
          sb.children.push_back(statement());
        }
        next();
        ctx_ = saved;
        return finish(std::move(sb));
      }
      if (modifier_applies() && !tok_is(p, "{")) next();
    }
    bool is_async = false, gen = false, accessor = false;
    if (is_name("async") && modifier_applies()) {
      next();
      is_async = true;
    } else if ((is_name("get") || is_name("set")) && modifier_applies()) {
      next();
      accessor = true;
    }
    if (eat("*")) gen = true;
    bool computed = false;
    AstNode key = property_key(&computed);
    if (is("(")) {
      AstNode m = start_at("MethodDefinition", start);
      m.computed = computed;
      if (!computed) m.ref_name = key.name;
      m.children.push_back(std::move(key));
      AstNode fn = start_node("FunctionExpression");
      fn.ref_name = m.ref_name;
      function_rest(fn, is_async, gen);
      m.children.push_back(std::move(fn));
      return finish(std::move(m));
    }
    if (accessor || is_async || gen) unexpected("expected method parameters");
    AstNode f = start_at("PropertyDefinition", start);
    f.computed = computed;
    f.children.push_back(std::move(key));
    if (eat("=")) {
      const FnCtx saved = ctx_;
      ctx_ = FnCtx{true, false, false};
      f.children.push_back(assign(false));
      ctx_ = saved;
    }
    semicolon();
    return finish(std::move(f));
  }

  // ---- patterns --------------------------------------------------------

  AstNode binding_target() {
    if (is("[")) return to_pattern(array_literal());
    if (is("{")) return to_pattern(object_literal());
    return identifier();
  }

  AstNode binding_element() {
    if (is("...")) {
      AstNode r = start_node("RestElement");
      next();
      r.children.push_back(binding_target());
      return finish(std::move(r));
    }
    const uint32_t start = tok_.start;
    AstNode target = binding_target();
    if (eat("=")) {
      AstNode a = start_at("AssignmentPattern", start);
      a.children.push_back(std::move(target));
      a.children.push_back(assign(false));
      return finish(std::move(a));
    }
    return target;
  }

  static AstNode to_pattern(AstNode n) {
    if (n.kind == "ObjectExpression") {
      n.kind = "ObjectPattern";
      for (auto& c : n.children) {
        if (c.kind == "SpreadElement") {
          c = to_pattern(std::move(c));
        } else if (c.kind == "Property" && !c.children.empty()) {
          c.children.back() = to_pattern(std::move(c.children.back()));
        }
      }
    } else if (n.kind == "ArrayExpression") {
      n.kind = "ArrayPattern";
      for (auto& c : n.children) c = to_pattern(std::move(c));
    } else if (n.kind == "AssignmentExpression" && !n.children.empty()) {
      n.kind = "AssignmentPattern";
      n.children[0] = to_pattern(std::move(n.children[0]));
    } else if (n.kind == "SpreadElement") {
      n.kind = "RestElement";
      if (!n.children.empty())
        n.children[0] = to_pattern(std::move(n.children[0]));
    }
    return n;
  }

  static std::vector<AstNode> arrow_params(AstNode cover) {
    if (cover.kind == "ArrowParams") return std::move(cover.children);
    if (cover.kind == "CallExpression") {
      std::vector<AstNode> out;
      for (size_t i = 1; i < cover.children.size(); ++i)
        out.push_back(std::move(cover.children[i]));
      return out;
    }
    // ParenthesizedExpression
    AstNode inner = std::move(cover.children[0]);
    if (inner.kind == "SequenceExpression" && inner.start == cover.start + 1)
      return std::move(inner.children);
    std::vector<AstNode> out;
    out.push_back(std::move(inner));
    return out;
  }

  // ---- expressions -----------------------------------------------------

  AstNode expression(bool no_in) {
    const uint32_t start = tok_.start;
    AstNode first = assign(no_in);
    if (!is(",")) return first;
    AstNode seq = start_at("SequenceExpression", start);
    seq.children.push_back(std::move(first));
    while (eat(",")) seq.children.push_back(assign(no_in));
    return finish(std::move(seq));
  }

  AstNode assign(bool no_in) {
    const uint32_t start = tok_.start;
    if (ctx_.is_generator && is_name("yield")) return yield_expression(no_in);
    if (tok_.type == Tok::kName && !tok_.escaped &&
        !is_reserved_word(tok_.value)) {
      auto [p, q] = peek2();
      if (tok_is(p, "=>") && !p.nl_before) {
        std::vector<AstNode> params;
        params.push_back(identifier());
        return arrow_function(start, std::move(params), false, no_in);
      }
      if (tok_.value == "async" && p.type == Tok::kName && !p.nl_before &&
          !is_reserved_word(p.value) && tok_is(q, "=>")) {
        next();
        std::vector<AstNode> params;
        params.push_back(identifier());
        return arrow_function(start, std::move(params), true, no_in);
      }
    }
    AstNode left = conditional(no_in);
    if (is("=>") && left.start == start) {
      if (left.kind == "ParenthesizedExpression" || left.kind == "ArrowParams")
        return arrow_function(start, arrow_params(std::move(left)), false,
                              no_in);
      if (left.kind == "CallExpression" && !left.children.empty() &&
          left.children[0].kind == "Identifier" &&
          left.children[0].name == "async")
        return arrow_function(start, arrow_params(std::move(left)), true,
                              no_in);
    }
    if (left.kind == "ArrowParams") unexpected("expected '=>'");
    if (tok_.type == Tok::kPunct && is_assign_op(tok_.value)) {
      const bool plain = tok_.value == "=";
      next();
      AstNode n = start_at("AssignmentExpression", start);
      n.children.push_back(plain ? to_pattern(std::move(left))
                                 : std::move(left));
      n.children.push_back(assign(no_in));
      return finish(std::move(n));
    }
    return left;
  }

  AstNode yield_expression(bool no_in) {
    AstNode n = start_node("YieldExpression");
    next();
    if (tok_.nl_before) return finish(std::move(n));
    const bool delegate = eat("*");
    const bool ends = tok_.type == Tok::kEof ||
                      (tok_.type == Tok::kPunct &&
                       (is(")") || is("]") || is("}") || is(",") || is(";") ||
                        is(":")));
    if (delegate || !ends) n.children.push_back(assign(no_in));
    return finish(std::move(n));
  }

  AstNode conditional(bool no_in) {
    const uint32_t start = tok_.start;
    AstNode test = binary(no_in);
    if (!eat("?")) return test;
    AstNode n = start_at("ConditionalExpression", start);
    n.children.push_back(std::move(test));
    n.children.push_back(assign(false));
    expect(":");
    n.children.push_back(assign(no_in));
    return finish(std::move(n));
  }

  AstNode binary(bool no_in) {
    const uint32_t start = tok_.start;
    AstNode left = unary();
    return binary_rest(std::move(left), start, 0, no_in);
  }

  AstNode binary_rest(AstNode left, uint32_t start, int min_prec, bool no_in) {
    for (;;) {
      const int prec = binary_precedence(tok_, no_in);
      if (prec == 0 || prec <= min_prec) return left;
      const std::string op = tok_.value;
      next();
      const uint32_t rstart = tok_.start;
      AstNode right = unary();
      right = binary_rest(std::move(right), rstart,
                          op == "**" ? prec - 1 : prec, no_in);
      const bool logical = op == "||" || op == "&&" || op == "??";
      AstNode n =
          start_at(logical ? "LogicalExpression" : "BinaryExpression", start);
      n.children.push_back(std::move(left));
      n.children.push_back(std::move(right));
      left = finish(std::move(n));
    }
  }

  AstNode unary() {
    const uint32_t start = tok_.start;
    if ((tok_.type == Tok::kPunct &&
         (is("!") || is("~") || is("+") || is("-"))) ||
        is_name("typeof") || is_name("void") || is_name("delete")) {
      AstNode n = start_node("UnaryExpression");
      next();
      n.children.push_back(unary());
      return finish(std::move(n));
    }
    if (is("++") || is("--")) {
      AstNode n = start_node("UpdateExpression");
      next();
      n.children.push_back(unary());
      return finish(std::move(n));
    }
    if ((ctx_.is_async && is_name("await")) || top_level_await()) {
      AstNode n = start_node("AwaitExpression");
      next();
      n.children.push_back(unary());
      return finish(std::move(n));
    }
    AstNode expr = subscripts(start, atom(), false);
    while ((is("++") || is("--")) && !tok_.nl_before) {
      AstNode n = start_at("UpdateExpression", start);
      next();
      n.children.push_back(std::move(expr));
      expr = finish(std::move(n));
    }
    return expr;
  }

  void call_arguments(AstNode& call) {
    expect("(");
    int count = 0;
    while (!is(")")) {
      if (is("...")) {
        AstNode s = start_node("SpreadElement");
        next();
        s.children.push_back(assign(false));
        call.children.push_back(finish(std::move(s)));
      } else {
        call.children.push_back(assign(false));
      }
      ++count;
      if (!is(")")) expect(",");
    }
    next();
    call.arity = count;
  }

  AstNode property_identifier() {
    if (tok_.type == Tok::kPrivateName) {
      AstNode n = start_node("PrivateIdentifier");
      n.name = tok_.value;
      next();
      return finish(std::move(n));
    }
    if (tok_.type != Tok::kName) unexpected("expected property name");
    AstNode n = start_node("Identifier");
    n.name = tok_.value;
    next();
    return finish(std::move(n));
  }

  AstNode member(uint32_t start, AstNode object, bool computed) {
    AstNode m = start_at("MemberExpression", start);
    m.computed = computed;
    m.children.push_back(std::move(object));
    if (computed) {
      next();  // '['
      m.children.push_back(expression(false));
      expect("]");
    } else {
      m.children.push_back(property_identifier());
    }
    return finish(std::move(m));
  }

  AstNode call(uint32_t start, AstNode callee) {
    AstNode c = start_at("CallExpression", start);
    c.ref_name = callee_name(callee);
    c.children.push_back(std::move(callee));
    call_arguments(c);
    return finish(std::move(c));
  }

  AstNode subscripts(uint32_t start, AstNode base, bool no_calls) {
    bool chain = false;
    for (;;) {
      if (is(".")) {
        next();
        base = member(start, std::move(base), false);
      } else if (is("?.")) {
        if (no_calls) break;
        chain = true;
        next();
        if (is("(")) {
          base = call(start, std::move(base));
        } else if (is("[")) {
          base = member(start, std::move(base), true);
        } else {
          base = member(start, std::move(base), false);
        }
      } else if (is("[")) {
        base = member(start, std::move(base), true);
      } else if (is("(") && !no_calls) {
        base = call(start, std::move(base));
      } else if (tok_.type == Tok::kBacktick) {
        AstNode t = start_at("TaggedTemplateExpression", start);
        t.children.push_back(std::move(base));
        t.children.push_back(template_literal());
        base = finish(std::move(t));
      } else {
        break;
      }
    }
    if (chain) {
      AstNode c = start_at("ChainExpression", start);
      c.children.push_back(std::move(base));
      return finish(std::move(c));
    }
    return base;
  }

  AstNode identifier() {
    if (tok_.type != Tok::kName) unexpected("expected identifier");
    if (!tok_.escaped && is_reserved_word(tok_.value))
      unexpected("unexpected keyword");
    AstNode n = start_node("Identifier");
    n.name = tok_.value;
    next();
    return finish(std::move(n));
  }

  AstNode literal_token() {
    AstNode n = start_node("Literal");
    next();
    return finish(std::move(n));
  }

  AstNode atom() {
    const uint32_t start = tok_.start;
    switch (tok_.type) {
      case Tok::kName: {
        if (tok_.escaped) return identifier();
        const std::string& w = tok_.value;
        if (w == "this") {
          AstNode n = start_node("ThisExpression");
          next();
          return finish(std::move(n));
        }
        if (w == "super") {
          AstNode n = start_node("Super");
          next();
          return finish(std::move(n));
        }
        if (w == "null" || w == "true" || w == "false") return literal_token();
        if (w == "function") return function_node(false, false, start, true);
        if (w == "async") {
          Token p = peek();
          if (p.type == Tok::kName && p.value == "function" && !p.nl_before) {
            next();
            return function_node(false, true, start, true);
          }
        }
        if (w == "class") return class_node(false, true);
        if (w == "new") return new_expression();
        if (w == "import") {
          next();
          if (eat(".")) {
            AstNode n = start_at("MetaProperty", start);
            n.children.push_back(property_identifier());
            return finish(std::move(n));
          }
          AstNode n = start_at("ImportExpression", start);
          expect("(");
          n.children.push_back(assign(false));
          if (eat(",") && !is(")")) n.children.push_back(assign(false));
          eat(",");
          expect(")");
          return finish(std::move(n));
        }
        return identifier();
      }
      case Tok::kNum:
      case Tok::kString:
        return literal_token();
      case Tok::kPrivateName:
        return property_identifier();
      case Tok::kBacktick:
        return template_literal();
      case Tok::kPunct:
        if (is("(")) return parenthesized();
        if (is("[")) return array_literal();
        if (is("{")) return object_literal();
        if (is("/") || is("/=")) {
          tok_ = lex_.rescan_regex(tok_.start);
          return literal_token();
        }
        break;
      default:
        break;
    }
    unexpected();
  }

  AstNode new_expression() {
    const uint32_t start = tok_.start;
    next();
    if (eat(".")) {
      AstNode n = start_at("MetaProperty", start);
      n.children.push_back(property_identifier());
      return finish(std::move(n));
    }
    const uint32_t cstart = tok_.start;
    AstNode callee = is_name("new") ? new_expression() : atom();
    callee = subscripts(cstart, std::move(callee), true);
    AstNode n = start_at("NewExpression", start);
    n.ref_name = callee_name(callee);
    n.children.push_back(std::move(callee));
    if (is("(")) call_arguments(n);
    return finish(std::move(n));
  }

  AstNode parenthesized() {
    const uint32_t start = tok_.start;
    next();
    std::vector<AstNode> items;
    bool arrow_only = false;
    while (!is(")")) {
      if (is("...")) {
        AstNode r = start_node("RestElement");
        next();
        r.children.push_back(binding_target());
        items.push_back(finish(std::move(r)));
        arrow_only = true;
      } else {
        items.push_back(assign(false));
      }
      if (!is(")")) {
        expect(",");
        if (is(")")) arrow_only = true;
      }
    }
    next();
    if (items.empty() || arrow_only) {
      AstNode n = start_at("ArrowParams", start);
      n.children = std::move(items);
      return finish(std::move(n));
    }
    AstNode n = start_at("ParenthesizedExpression", start);
    if (items.size() == 1) {
      n.children.push_back(std::move(items[0]));
    } else {
      AstNode seq = start_at("SequenceExpression", items.front().start);
      seq.end = items.back().end;
      seq.children = std::move(items);
      n.children.push_back(std::move(seq));
    }
    return finish(std::move(n));
  }

  AstNode array_literal() {
    AstNode n = start_node("ArrayExpression");
    next();
    while (!is("]")) {
      if (is(",")) {
        next();  // hole
        continue;
      }
      if (is("...")) {
        AstNode s = start_node("SpreadElement");
        next();
        s.children.push_back(assign(false));
        n.children.push_back(finish(std::move(s)));
      } else {
        n.children.push_back(assign(false));
      }
      if (!is("]")) expect(",");
    }
    next();
    return finish(std::move(n));
  }

  AstNode property_key(bool* computed) {
    *computed = false;
    if (is("[")) {
      next();
      *computed = true;
      AstNode k = assign(false);
      expect("]");
      return k;
    }
    if (tok_.type == Tok::kString || tok_.type == Tok::kNum)
      return literal_token();
    return property_identifier();
  }

  AstNode object_literal() {
    AstNode n = start_node("ObjectExpression");
    expect("{");
    while (!eat("}")) {
      if (is("...")) {
        AstNode s = start_node("SpreadElement");
        next();
        s.children.push_back(assign(false));
        n.children.push_back(finish(std::move(s)));
      } else {
        n.children.push_back(object_property());
      }
      if (!is("}")) expect(",");
    }
    return finish(std::move(n));
  }

  AstNode object_property() {
    AstNode p = start_node("Property");
    bool is_async = false, gen = false, accessor = false;
    if ((is_name("get") || is_name("set")) && modifier_applies() &&
        !tok_is(peek(), "{")) {
      next();
      accessor = true;
    } else if (is_name("async") && modifier_applies() &&
               !tok_is(peek(), "{")) {
      next();
      is_async = true;
    }
    if (eat("*")) gen = true;
    bool computed = false;
    AstNode key = property_key(&computed);
    p.computed = computed;
    if (is("(") || accessor || is_async || gen) {
      AstNode fn = start_node("FunctionExpression");
      if (!computed) fn.ref_name = key.name;
      p.children.push_back(std::move(key));
      function_rest(fn, is_async, gen);
      p.children.push_back(std::move(fn));
      return finish(std::move(p));
    }
    if (eat(":")) {
      p.children.push_back(std::move(key));
      p.children.push_back(assign(false));
      return finish(std::move(p));
    }
    if (key.kind != "Identifier" || computed)
      unexpected("expected ':' in object literal");
    if (is("=")) {
      AstNode a = start_at("AssignmentPattern", key.start);
      next();
      a.children.push_back(std::move(key));
      a.children.push_back(assign(false));
      p.children.push_back(finish(std::move(a)));
    } else {
      p.children.push_back(std::move(key));
    }
    return finish(std::move(p));
  }

  AstNode template_literal() {
    AstNode n = start_node("TemplateLiteral");
    uint32_t pos = tok_.end;
    for (;;) {
      TemplateChunk ch = lex_.read_template_chunk(pos);
      if (ch.end > ch.start) {
        AstNode q = start_at("TemplateElement", ch.start);
        q.end = ch.end;
        n.children.push_back(std::move(q));
      }
      lex_.reset(ch.resume);
      if (!ch.opens_expr) {
        prev_end_ = ch.resume;
        tok_ = lex_.next();
        n.end = ch.resume;
        return n;
      }
      tok_ = lex_.next();
      n.children.push_back(expression(false));
      if (!is("}")) unexpected("expected '}' in template literal");
      pos = tok_.end;
    }
  }

  std::string_view src_;
  Lexer lex_;
  Token tok_;
  uint32_t prev_end_ = 0;
  FnCtx ctx_;
};

}  // namespace

AstNode parse_program(std::string_view source) {
  Parser p(source);
  return p.program();
}

bool try_parse_program(std::string_view source, AstNode* out, ParseError* err) {
  try {
    *out = parse_program(source);
    return true;
  } catch (const SyntaxError& e) {
    if (err) *err = ParseError{e.what(), e.offset, e.line, e.column};
    return false;
  }
}

}  // namespace cgnn::js
