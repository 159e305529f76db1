#pragma once

#include <string_view>

#include "cgnn/js/ast.hpp"

namespace cgnn::js {

// Parses one source file (script or module goal, decided leniently) into an
// ESTree-shaped tree rooted at a Program node. Parenthesized expressions are
// kept as ParenthesizedExpression nodes. Throws js::SyntaxError (declared in
// the lexer) on malformed input; the message carries line:column.
AstNode parse_program(std::string_view source);

// Thin error wrapper so callers need not include the lexer.
bool try_parse_program(std::string_view source, AstNode* out, ParseError* err);

}  // namespace cgnn::js
