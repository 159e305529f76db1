#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cgnn::js {

enum class Tok {
  kEof,
  kName,
  kPrivateName,
  kNum,
  kString,
  kBacktick,
  kPunct,
  kRegex,
};

struct Token {
  Tok type = Tok::kEof;
  std::string value;  // decoded identifier text, or punctuator text
  uint32_t start = 0;
  uint32_t end = 0;
  bool nl_before = false;
  bool escaped = false;  // identifier contained unicode escapes
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(const std::string& msg, uint32_t offset, uint32_t line,
              uint32_t column)
      : std::runtime_error(msg), offset(offset), line(line), column(column) {}
  uint32_t offset;
  uint32_t line;    // 1-based
  uint32_t column;  // 1-based, in bytes
};

struct TemplateChunk {
  uint32_t start = 0;   // first byte of the raw text
  uint32_t end = 0;     // one past the raw text
  bool opens_expr = false;  // ended with "${" rather than a backtick
  uint32_t resume = 0;  // offset just after the terminator
};

// On-demand scanner. The parser decides whether '/' starts a regular
// expression (rescan_regex) and drives template literals chunk by chunk.
class Lexer {
 public:
  explicit Lexer(std::string_view src);

  Token next();
  Token rescan_regex(uint32_t start);
  TemplateChunk read_template_chunk(uint32_t pos);

  uint32_t pos() const { return pos_; }
  void reset(uint32_t pos) { pos_ = pos; }

  [[noreturn]] void fail(const std::string& msg, uint32_t offset) const;
  std::pair<uint32_t, uint32_t> line_col(uint32_t offset) const;

 private:
  bool skip_space_and_comments();  // returns true if a line break was seen
  void scan_identifier(Token& t);
  void scan_number(Token& t);
  void scan_string(Token& t, char quote);
  bool at_line_terminator(uint32_t p, uint32_t* width) const;
  uint32_t space_width(uint32_t p) const;

  std::string_view src_;
  uint32_t pos_ = 0;
  std::vector<uint32_t> line_starts_;
};

bool is_reserved_word(std::string_view word);

}  // namespace cgnn::js
