#include "js/lexer.hpp"

#include <algorithm>
#include <array>

namespace cgnn::js {

namespace {

constexpr std::array<std::string_view, 38> kReserved = {
    "break",    "case",   "catch",      "class",   "const",  "continue",
    "debugger", "default", "delete",    "do",      "else",   "enum",
    "export",   "extends", "false",     "finally", "for",    "function",
    "if",       "import", "in",         "instanceof", "new", "null",
    "return",   "super",  "switch",     "this",    "throw",  "true",
    "try",      "typeof", "var",        "void",    "while",  "with",
    "implements", "interface"};

// Longest first within each leading character.
constexpr std::array<std::string_view, 52> kPunctuators = {
    ">>>=", "...", "===", "!==", "**=", "<<=", ">>=", ">>>", "&&=", "||=",
    "?\?=",  "=>",  "==",  "!=",  "<=",  ">=",  "&&",  "||",  "??",  "?.",
    "++",   "--",  "+=",  "-=",  "*=",  "/=",  "%=",  "&=",  "|=",  "^=",
    "<<",   ">>",  "**",  "{",   "}",   "(",   ")",   "[",   "]",   ";",
    ",",    "<",   ">",   "+",   "-",   "*",   "/",   "%",   "&",   "|",
    "^",    "!"};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}
uint32_t hex_value(char c) {
  if (is_digit(c)) return static_cast<uint32_t>(c - '0');
  if (c >= 'a' && c <= 'f') return static_cast<uint32_t>(c - 'a' + 10);
  return static_cast<uint32_t>(c - 'A' + 10);
}
bool is_ascii_id_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '$' ||
         c == '_';
}

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

}  // namespace

bool is_reserved_word(std::string_view word) {
  return std::find(kReserved.begin(), kReserved.end(), word) !=
         kReserved.end();
}

Lexer::Lexer(std::string_view src) : src_(src) {
  line_starts_.push_back(0);
  for (uint32_t i = 0; i < src_.size(); ++i) {
    uint32_t w = 0;
    if (at_line_terminator(i, &w)) {
      if (src_[i] == '\r' && i + 1 < src_.size() && src_[i + 1] == '\n') ++w;
      line_starts_.push_back(i + w);
      i += w - 1;
    }
  }
  // Hashbang line.
  if (src_.size() >= 2 && src_[0] == '#' && src_[1] == '!') {
    while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
  }
}

std::pair<uint32_t, uint32_t> Lexer::line_col(uint32_t offset) const {
  auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
  const uint32_t line = static_cast<uint32_t>(it - line_starts_.begin());
  return {line, offset - line_starts_[line - 1] + 1};
}

void Lexer::fail(const std::string& msg, uint32_t offset) const {
  auto [line, col] = line_col(offset);
  throw SyntaxError(msg + " (" + std::to_string(line) + ":" +
                        std::to_string(col) + ")",
                    offset, line, col);
}

bool Lexer::at_line_terminator(uint32_t p, uint32_t* width) const {
  if (p >= src_.size()) return false;
  const char c = src_[p];
  if (c == '\n' || c == '\r') {
    *width = 1;
    return true;
  }
  // U+2028, U+2029
  if (static_cast<unsigned char>(c) == 0xE2 && p + 2 < src_.size() &&
      static_cast<unsigned char>(src_[p + 1]) == 0x80 &&
      (static_cast<unsigned char>(src_[p + 2]) == 0xA8 ||
       static_cast<unsigned char>(src_[p + 2]) == 0xA9)) {
    *width = 3;
    return true;
  }
  return false;
}

uint32_t Lexer::space_width(uint32_t p) const {
  const auto at = [&](uint32_t i) -> unsigned {
    return i < src_.size() ? static_cast<unsigned char>(src_[i]) : 0u;
  };
  const unsigned c = at(p);
  if (c == ' ' || c == '\t' || c == '\v' || c == '\f') return 1;
  if (c == 0xC2 && at(p + 1) == 0xA0) return 2;
  if (c == 0xEF && at(p + 1) == 0xBB && at(p + 2) == 0xBF) return 3;
  if (c == 0xE2 && at(p + 1) == 0x80 &&
      ((at(p + 2) >= 0x80 && at(p + 2) <= 0x8A) || at(p + 2) == 0xAF))
    return 3;
  if (c == 0xE2 && at(p + 1) == 0x81 && at(p + 2) == 0x9F) return 3;
  if (c == 0xE3 && at(p + 1) == 0x80 && at(p + 2) == 0x80) return 3;
  if (c == 0xE1 && at(p + 1) == 0x9A && at(p + 2) == 0x80) return 3;
  return 0;
}

bool Lexer::skip_space_and_comments() {
  bool newline = false;
  while (pos_ < src_.size()) {
    uint32_t w = 0;
    if (at_line_terminator(pos_, &w)) {
      newline = true;
      pos_ += w;
      continue;
    }
    if ((w = space_width(pos_)) > 0) {
      pos_ += w;
      continue;
    }
    if (src_[pos_] == '/' && pos_ + 1 < src_.size()) {
      if (src_[pos_ + 1] == '/') {
        pos_ += 2;
        while (pos_ < src_.size() && !at_line_terminator(pos_, &w)) ++pos_;
        continue;
      }
      if (src_[pos_ + 1] == '*') {
        const uint32_t open = pos_;
        pos_ += 2;
        for (;;) {
          if (pos_ + 1 >= src_.size()) fail("unterminated comment", open);
          if (src_[pos_] == '*' && src_[pos_ + 1] == '/') {
            pos_ += 2;
            break;
          }
          if (at_line_terminator(pos_, &w)) newline = true;
          ++pos_;
        }
        continue;
      }
    }
    break;
  }
  return newline;
}

Token Lexer::next() {
  Token t;
  t.nl_before = skip_space_and_comments();
  t.start = pos_;
  if (pos_ >= src_.size()) {
    t.type = Tok::kEof;
    t.end = pos_;
    return t;
  }
  const char c = src_[pos_];
  const unsigned char uc = static_cast<unsigned char>(c);
  if (is_ascii_id_start(c) || c == '\\' || uc >= 0x80) {
    scan_identifier(t);
    t.type = Tok::kName;
  } else if (c == '#') {
    ++pos_;
    if (pos_ >= src_.size() ||
        !(is_ascii_id_start(src_[pos_]) || src_[pos_] == '\\' ||
          static_cast<unsigned char>(src_[pos_]) >= 0x80))
      fail("unexpected '#'", t.start);
    scan_identifier(t);
    t.value = "#" + t.value;
    t.type = Tok::kPrivateName;
  } else if (is_digit(c) ||
             (c == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
    scan_number(t);
    t.type = Tok::kNum;
  } else if (c == '"' || c == '\'') {
    scan_string(t, c);
    t.type = Tok::kString;
  } else if (c == '`') {
    ++pos_;
    t.type = Tok::kBacktick;
    t.value = "`";
  } else {
    t.type = Tok::kPunct;
    std::string_view rest = src_.substr(pos_);
    std::string_view found;
    for (std::string_view p : kPunctuators) {
      if (rest.substr(0, p.size()) == p) {
        found = p;
        break;
      }
    }
    if (found.empty()) {
      static constexpr std::string_view kSingles = "~?:=.@";
      if (kSingles.find(c) == std::string_view::npos)
        fail(std::string("unexpected character '") + c + "'", pos_);
      found = rest.substr(0, 1);
      if (rest.substr(0, 3) == "...") found = rest.substr(0, 3);
    }
    // "?." followed by a digit is a conditional and a number.
    if (found == "?." && rest.size() > 2 && is_digit(rest[2]))
      found = rest.substr(0, 1);
    t.value = std::string(found);
    pos_ += static_cast<uint32_t>(found.size());
  }
  t.end = pos_;
  return t;
}

void Lexer::scan_identifier(Token& t) {
  std::string out;
  for (;;) {
    if (pos_ >= src_.size()) break;
    const char c = src_[pos_];
    const unsigned char uc = static_cast<unsigned char>(c);
    if (is_ascii_id_start(c) || is_digit(c)) {
      out += c;
      ++pos_;
    } else if (c == '\\') {
      if (pos_ + 1 >= src_.size() || src_[pos_ + 1] != 'u')
        fail("bad escape in identifier", pos_);
      pos_ += 2;
      uint32_t cp = 0;
      if (pos_ < src_.size() && src_[pos_] == '{') {
        ++pos_;
        while (pos_ < src_.size() && src_[pos_] != '}') {
          if (!is_hex(src_[pos_])) fail("bad escape in identifier", pos_);
          cp = cp * 16 + hex_value(src_[pos_]);
          ++pos_;
        }
        ++pos_;
      } else {
        for (int i = 0; i < 4; ++i, ++pos_) {
          if (pos_ >= src_.size() || !is_hex(src_[pos_]))
            fail("bad escape in identifier", pos_);
          cp = cp * 16 + hex_value(src_[pos_]);
        }
      }
      append_utf8(out, cp);
      t.escaped = true;
    } else if (uc >= 0x80) {
      uint32_t w = 0;
      if (at_line_terminator(pos_, &w) || space_width(pos_) > 0) break;
      out += c;
      ++pos_;
    } else {
      break;
    }
  }
  t.value = std::move(out);
}

void Lexer::scan_number(Token& t) {
  auto digits = [&](auto pred) {
    while (pos_ < src_.size() && (pred(src_[pos_]) || src_[pos_] == '_'))
      ++pos_;
  };
  const char c = src_[pos_];
  if (c == '0' && pos_ + 1 < src_.size() &&
      std::string_view("xXoObB").find(src_[pos_ + 1]) != std::string_view::npos) {
    pos_ += 2;
    digits(is_hex);
  } else {
    digits(is_digit);
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits(is_digit);
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
        ++pos_;
      if (pos_ >= src_.size() || !is_digit(src_[pos_]))
        fail("malformed exponent", t.start);
      digits(is_digit);
    }
  }
  if (pos_ < src_.size() && src_[pos_] == 'n') ++pos_;
  if (pos_ < src_.size() && (is_ascii_id_start(src_[pos_])))
    fail("identifier directly after number", pos_);
  t.value = std::string(src_.substr(t.start, pos_ - t.start));
}

void Lexer::scan_string(Token& t, char quote) {
  ++pos_;
  for (;;) {
    if (pos_ >= src_.size()) fail("unterminated string", t.start);
    const char c = src_[pos_];
    if (c == quote) {
      ++pos_;
      break;
    }
    if (c == '\\') {
      pos_ += 2;
      // \r\n line continuation
      if (pos_ - 1 < src_.size() && src_[pos_ - 1] == '\r' &&
          pos_ < src_.size() && src_[pos_] == '\n')
        ++pos_;
      continue;
    }
    if (c == '\n' || c == '\r') fail("unterminated string", t.start);
    ++pos_;
  }
  t.value = std::string(src_.substr(t.start, pos_ - t.start));
}

Token Lexer::rescan_regex(uint32_t start) {
  Token t;
  t.type = Tok::kRegex;
  t.start = start;
  pos_ = start + 1;
  bool in_class = false;
  for (;;) {
    uint32_t w = 0;
    if (pos_ >= src_.size() || at_line_terminator(pos_, &w))
      fail("unterminated regular expression", start);
    const char c = src_[pos_];
    if (c == '\\') {
      pos_ += 2;
      continue;
    }
    if (c == '[') in_class = true;
    else if (c == ']') in_class = false;
    else if (c == '/' && !in_class) {
      ++pos_;
      break;
    }
    ++pos_;
  }
  while (pos_ < src_.size() &&
         (is_ascii_id_start(src_[pos_]) || is_digit(src_[pos_])))
    ++pos_;
  t.end = pos_;
  t.value = std::string(src_.substr(start, pos_ - start));
  return t;
}

TemplateChunk Lexer::read_template_chunk(uint32_t pos) {
  TemplateChunk ch;
  ch.start = pos;
  uint32_t p = pos;
  for (;;) {
    if (p >= src_.size()) fail("unterminated template literal", pos);
    const char c = src_[p];
    if (c == '\\') {
      p += 2;
      continue;
    }
    if (c == '`') {
      ch.end = p;
      ch.resume = p + 1;
      ch.opens_expr = false;
      return ch;
    }
    if (c == '$' && p + 1 < src_.size() && src_[p + 1] == '{') {
      ch.end = p;
      ch.resume = p + 2;
      ch.opens_expr = true;
      return ch;
    }
    ++p;
  }
}

}  // namespace cgnn::js
