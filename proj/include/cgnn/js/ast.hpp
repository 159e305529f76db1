#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cgnn::js {

// Node kinds follow ESTree naming. Project and SemanticName are synthetic
// kinds added by the program graph; every other kind is produced by the
// parser. The order of this list is the embedding vocabulary order.
std::span<const std::string_view> kind_vocabulary();

// Index into kind_vocabulary(), or nullopt for kinds outside it.
std::optional<size_t> kind_index(std::string_view kind);

bool is_function_kind(std::string_view kind);   // definitions with a body
bool is_call_site_kind(std::string_view kind);  // CallExpression, NewExpression

// Children appear in source order. Names are carried only by identifier
// tokens (Identifier, PrivateIdentifier); declared/called names of
// functions, classes, methods and call sites live in ref_name.
struct AstNode {
  std::string kind;
  std::optional<std::string> name;
  std::optional<std::string> ref_name;
  uint32_t start = 0;
  uint32_t end = 0;
  // Formal parameters for function kinds, arguments for call sites.
  int arity = 0;
  // Computed member access / computed property key.
  bool computed = false;
  // Function kinds only: offset where an entry hook may be spliced in, just
  // after the opening brace and any directive prologue. Unset for arrow
  // functions with an expression body.
  std::optional<uint32_t> body_insert;
  std::vector<AstNode> children;
};

struct ParseError {
  std::string message;
  uint32_t offset = 0;
  uint32_t line = 0;
  uint32_t column = 0;
};

}  // namespace cgnn::js
