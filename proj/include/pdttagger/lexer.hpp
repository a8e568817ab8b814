#pragma once

// Comment- and literal-aware tokenizer for C source. It does not expand
// macros; preprocessor directives become single tokens carrying their
// logical text (continuations spliced, comments replaced by a space).

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pdttagger::lex {

enum class TokenKind { Identifier, Number, String, Char, Punct, Directive };

struct Token {
  TokenKind kind{};
  std::size_t begin = 0;  // byte offset of first character
  std::size_t end = 0;    // byte offset one past the last character
  std::size_t line = 0;   // 1-based line of first character
  std::size_t col = 0;    // 1-based column of first character
  std::size_t end_line = 0;  // 1-based line of last character

  // Directive-only fields.
  std::string logical;        // text after '#', spliced and comment-free
  std::size_t code_end = 0;   // offset after the last code character

  std::string_view text(std::string_view src) const { return src.substr(begin, end - begin); }
  bool is(std::string_view src, std::string_view s) const { return text(src) == s; }
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    bool line_start = true;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\n') {
        advance();
        line_start = true;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        advance();
        continue;
      }
      if (c == '\\' && next_is_newline(pos_ + 1)) {
        skip_splice();
        continue;
      }
      if (starts_with("//")) {
        skip_line_comment();
        continue;
      }
      if (starts_with("/*")) {
        skip_block_comment();
        continue;
      }
      if (c == '#' && line_start) {
        out.push_back(directive());
        line_start = true;
        continue;
      }
      line_start = false;
      out.push_back(ordinary());
    }
    return out;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;

  bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }

  bool next_is_newline(std::size_t p) const {
    if (p < src_.size() && src_[p] == '\n') return true;
    return p + 1 < src_.size() && src_[p] == '\r' && src_[p + 1] == '\n';
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_splice() {
    advance();  // backslash
    if (src_[pos_] == '\r') advance();
    advance();  // newline
  }

  void skip_line_comment() {
    while (pos_ < src_.size() && src_[pos_] != '\n') {
      if (src_[pos_] == '\\' && next_is_newline(pos_ + 1)) {
        skip_splice();
        continue;
      }
      advance();
    }
  }

  void skip_block_comment() {
    advance();
    advance();
    while (pos_ < src_.size() && !starts_with("*/")) advance();
    if (pos_ < src_.size()) {
      advance();
      advance();
    }
  }

  void skip_quoted(char quote) {
    advance();
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\\') {
        advance();
        if (pos_ < src_.size()) advance();
        continue;
      }
      if (c == quote || c == '\n') {
        if (c == quote) advance();
        return;
      }
      advance();
    }
  }

  Token start(TokenKind kind) const {
    Token t;
    t.kind = kind;
    t.begin = pos_;
    t.line = line_;
    t.col = col_;
    return t;
  }

  void finish(Token& t) const {
    t.end = pos_;
    t.end_line = line_;
  }

  static bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
  static bool digit(char c) { return c >= '0' && c <= '9'; }

  Token ordinary() {
    const char c = src_[pos_];
    if (c == '"' || c == '\'') {
      Token t = start(c == '"' ? TokenKind::String : TokenKind::Char);
      skip_quoted(c);
      finish(t);
      return t;
    }
    if (ident_start(c)) {
      Token t = start(TokenKind::Identifier);
      while (pos_ < src_.size() && ident_char(src_[pos_])) advance();
      finish(t);
      return t;
    }
    if (digit(c) || (c == '.' && pos_ + 1 < src_.size() && digit(src_[pos_ + 1]))) {
      Token t = start(TokenKind::Number);
      while (pos_ < src_.size()) {
        const char d = src_[pos_];
        if ((d == '+' || d == '-') && (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E' || src_[pos_ - 1] == 'p' ||
                                       src_[pos_ - 1] == 'P')) {
          advance();
          continue;
        }
        if (!ident_char(d) && d != '.') break;
        advance();
      }
      finish(t);
      return t;
    }
    Token t = start(TokenKind::Punct);
    advance();
    finish(t);
    return t;
  }

  Token directive() {
    Token t = start(TokenKind::Directive);
    advance();  // '#'
    std::string logical;
    std::size_t code_end = pos_;
    while (pos_ < src_.size() && src_[pos_] != '\n') {
      const char c = src_[pos_];
      if (c == '\\' && next_is_newline(pos_ + 1)) {
        skip_splice();
        continue;
      }
      if (starts_with("//")) {
        skip_line_comment();
        logical += ' ';
        break;
      }
      if (starts_with("/*")) {
        skip_block_comment();
        logical += ' ';
        continue;
      }
      if (c == '"' || c == '\'') {
        const std::size_t b = pos_;
        skip_quoted(c);
        logical.append(src_.substr(b, pos_ - b));
        code_end = pos_;
        continue;
      }
      logical += (c == '\t' || c == '\r') ? ' ' : c;
      advance();
      if (c != ' ' && c != '\t' && c != '\r') code_end = pos_;
    }
    t.end = pos_;
    t.end_line = line_;
    t.logical = std::move(logical);
    t.code_end = code_end;
    return t;
  }
};

inline std::vector<Token> tokenize(std::string_view src) { return Lexer(src).run(); }

}  // namespace pdttagger::lex
