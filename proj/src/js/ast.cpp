#include "cgnn/js/ast.hpp"

#include <algorithm>
#include <array>

namespace cgnn::js {

namespace {

constexpr std::array<std::string_view, 74> kKinds = {
    "Project",
    "SemanticName",
    "Program",
    // statements
    "ExpressionStatement",
    "BlockStatement",
    "StaticBlock",
    "EmptyStatement",
    "DebuggerStatement",
    "WithStatement",
    "ReturnStatement",
    "LabeledStatement",
    "BreakStatement",
    "ContinueStatement",
    "IfStatement",
    "SwitchStatement",
    "SwitchCase",
    "ThrowStatement",
    "TryStatement",
    "CatchClause",
    "WhileStatement",
    "DoWhileStatement",
    "ForStatement",
    "ForInStatement",
    "ForOfStatement",
    // declarations
    "FunctionDeclaration",
    "VariableDeclaration",
    "VariableDeclarator",
    "ClassDeclaration",
    "ClassExpression",
    "ClassBody",
    "MethodDefinition",
    "PropertyDefinition",
    // expressions
    "Identifier",
    "PrivateIdentifier",
    "Literal",
    "TemplateLiteral",
    "TemplateElement",
    "TaggedTemplateExpression",
    "ThisExpression",
    "Super",
    "ArrayExpression",
    "ObjectExpression",
    "Property",
    "SpreadElement",
    "FunctionExpression",
    "ArrowFunctionExpression",
    "UnaryExpression",
    "UpdateExpression",
    "BinaryExpression",
    "LogicalExpression",
    "AssignmentExpression",
    "ConditionalExpression",
    "CallExpression",
    "NewExpression",
    "MemberExpression",
    "ChainExpression",
    "SequenceExpression",
    "ParenthesizedExpression",
    "YieldExpression",
    "AwaitExpression",
    "MetaProperty",
    "ImportExpression",
    // patterns
    "ObjectPattern",
    "ArrayPattern",
    "RestElement",
    "AssignmentPattern",
    // modules
    "ImportDeclaration",
    "ImportSpecifier",
    "ImportDefaultSpecifier",
    "ImportNamespaceSpecifier",
    "ExportNamedDeclaration",
    "ExportSpecifier",
    "ExportDefaultDeclaration",
    "ExportAllDeclaration",
};

}  // namespace

std::span<const std::string_view> kind_vocabulary() { return kKinds; }

std::optional<size_t> kind_index(std::string_view kind) {
  auto it = std::find(kKinds.begin(), kKinds.end(), kind);
  if (it == kKinds.end()) return std::nullopt;
  return static_cast<size_t>(it - kKinds.begin());
}

bool is_function_kind(std::string_view kind) {
  return kind == "FunctionDeclaration" || kind == "FunctionExpression" ||
         kind == "ArrowFunctionExpression";
}

bool is_call_site_kind(std::string_view kind) {
  return kind == "CallExpression" || kind == "NewExpression";
}

}  // namespace cgnn::js
