#pragma once

// Locates instrumentable OpenMP constructs in C source text and parses the
// region-selection configuration format.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdttagger/error.hpp"
#include "pdttagger/lexer.hpp"
#include "pdttagger/text.hpp"

namespace pdttagger {

using RegionId = int;

enum class RegionKind { ParallelBlock, ParallelFor, ParallelSections, Single, Task };

constexpr std::string_view to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::ParallelBlock: return "ParallelBlock";
    case RegionKind::ParallelFor: return "ParallelFor";
    case RegionKind::ParallelSections: return "ParallelSections";
    case RegionKind::Single: return "Single";
    case RegionKind::Task: return "Task";
  }
  return "ParallelBlock";
}

inline std::optional<RegionKind> parse_region_kind(std::string_view s) {
  for (auto k : {RegionKind::ParallelBlock, RegionKind::ParallelFor, RegionKind::ParallelSections,
                 RegionKind::Single, RegionKind::Task}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// True for the kinds that create a thread team and accept num_threads.
constexpr bool is_parallel(RegionKind kind) {
  return kind == RegionKind::ParallelBlock || kind == RegionKind::ParallelFor ||
         kind == RegionKind::ParallelSections;
}

struct Region {
  RegionId id = 0;
  RegionKind kind = RegionKind::ParallelBlock;
  std::string file;
  std::size_t pragma_line = 0;
  std::size_t block_begin = 0;
  std::size_t block_end = 0;
  std::string function;

  bool operator==(const Region&) const = default;
};

struct SelectionEntry {
  std::string function;
  std::optional<std::string> file;
  std::optional<std::pair<std::size_t, std::size_t>> line_range;

  bool operator==(const SelectionEntry&) const = default;
};

struct InstrumentationConfig {
  std::vector<SelectionEntry> entries;

  bool operator==(const InstrumentationConfig&) const = default;
};

namespace detail {

/// Words of a `#pragma omp ...` clause list, or empty when the directive is
/// not an OpenMP pragma. Words are split on whitespace, parentheses and commas.
inline std::vector<std::string> omp_words(std::string_view logical) {
  std::vector<std::string> words;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : logical) {
    if (c == ' ' || c == '\t' || c == '(' || c == ')' || c == ',') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  if (words.size() < 2 || words[0] != "pragma" || words[1] != "omp") return {};
  words.erase(words.begin(), words.begin() + 2);
  return words;
}

inline bool is_pragma(const lex::Token& t) {
  if (t.kind != lex::TokenKind::Directive) return false;
  const auto w = text::split_ws(t.logical);
  return !w.empty() && w[0] == "pragma";
}

/// OpenMP directives that stand alone and do not own a following statement.
inline bool is_standalone_omp(const lex::Token& t) {
  const auto words = omp_words(t.logical);
  if (words.empty()) return false;
  static const std::set<std::string, std::less<>> standalone = {
      "barrier", "taskwait", "taskyield", "flush", "cancel", "cancellation", "threadprivate",
      "declare", "requires", "depobj", "scan", "end"};
  if (standalone.count(words[0])) return true;
  if (words[0] == "target" && words.size() > 1 &&
      (words[1] == "update" || words[1] == "enter" || words[1] == "exit")) {
    return true;
  }
  return false;
}

inline std::optional<RegionKind> region_kind_of(const lex::Token& t) {
  if (t.kind != lex::TokenKind::Directive) return std::nullopt;
  const auto words = omp_words(t.logical);
  if (words.empty()) return std::nullopt;
  if (words[0] == "parallel") {
    if (words.size() > 1 && words[1] == "for") return RegionKind::ParallelFor;
    if (words.size() > 1 && words[1] == "sections") return RegionKind::ParallelSections;
    return RegionKind::ParallelBlock;
  }
  if (words[0] == "single") return RegionKind::Single;
  if (words[0] == "task") return RegionKind::Task;
  return std::nullopt;
}

inline std::string position(const lex::Token& t) {
  return "line " + std::to_string(t.line) + ", column " + std::to_string(t.col);
}

/// Statement-extent parser over the token stream.
class StatementParser {
 public:
  StatementParser(std::string_view src, const std::vector<lex::Token>& toks) : src_(src), toks_(toks) {}

  /// Index of the last token of the statement starting at token `i`.
  std::size_t statement_end(std::size_t i) const {
    if (i >= toks_.size()) throw Error(ErrorCode::PragmaWithoutStatement, "statement expected at end of file");
    const auto& t = toks_[i];
    if (t.kind == lex::TokenKind::Directive) {
      if (is_pragma(t) && is_standalone_omp(t)) return i;
      return statement_end(i + 1);
    }
    if (punct(i, "{")) return match(i, '{', '}');
    if (punct(i, ";")) return i;
    if (t.kind == lex::TokenKind::Identifier) {
      const auto word = t.text(src_);
      if (word == "if") {
        const auto close = match(expect_paren(i + 1), '(', ')');
        const auto body_end = statement_end(close + 1);
        if (body_end + 1 < toks_.size() && toks_[body_end + 1].kind == lex::TokenKind::Identifier &&
            toks_[body_end + 1].is(src_, "else")) {
          return statement_end(body_end + 2);
        }
        return body_end;
      }
      if (word == "for" || word == "while" || word == "switch") {
        const auto close = match(expect_paren(i + 1), '(', ')');
        return statement_end(close + 1);
      }
      if (word == "do") {
        const auto body_end = statement_end(i + 1);
        std::size_t j = body_end + 1;
        if (j >= toks_.size() || !toks_[j].is(src_, "while")) {
          throw Error(ErrorCode::PragmaWithoutStatement, "do statement without while near " + position(t));
        }
        const auto close = match(expect_paren(j + 1), '(', ')');
        return simple_end(close + 1);
      }
      if (word != "default" && i + 1 < toks_.size() && punct(i + 1, ":")) return statement_end(i + 2);
    }
    return simple_end(i);
  }

  /// Index of the matching closer for the opener at token `i`.
  std::size_t match(std::size_t i, char open, char close) const {
    int depth = 0;
    for (std::size_t j = i; j < toks_.size(); ++j) {
      if (toks_[j].kind != lex::TokenKind::Punct) continue;
      const char c = src_[toks_[j].begin];
      if (c == open) ++depth;
      if (c == close && --depth == 0) return j;
    }
    throw Error(ErrorCode::UnbalancedBraces,
                std::string("unmatched '") + open + "' at " + position(toks_[i]));
  }

 private:
  std::string_view src_;
  const std::vector<lex::Token>& toks_;

  bool punct(std::size_t i, std::string_view p) const {
    return i < toks_.size() && toks_[i].kind == lex::TokenKind::Punct && toks_[i].is(src_, p);
  }

  std::size_t expect_paren(std::size_t i) const {
    if (!punct(i, "(")) {
      if (i >= toks_.size()) throw Error(ErrorCode::PragmaWithoutStatement, "statement expected at end of file");
      throw Error(ErrorCode::PragmaWithoutStatement, "expected '(' at " + position(toks_[i]));
    }
    return i;
  }

  /// Expression-like statement: up to the first ';' outside any bracket.
  std::size_t simple_end(std::size_t i) const {
    int depth = 0;
    for (std::size_t j = i; j < toks_.size(); ++j) {
      if (toks_[j].kind != lex::TokenKind::Punct) continue;
      const char c = src_[toks_[j].begin];
      if (c == '(' || c == '[' || c == '{') ++depth;
      if (c == ')' || c == ']' || c == '}') {
        if (--depth < 0) {
          throw Error(ErrorCode::PragmaWithoutStatement, "statement ends early at " + position(toks_[j]));
        }
      }
      if (c == ';' && depth == 0) return j;
    }
    throw Error(ErrorCode::PragmaWithoutStatement, "unterminated statement starting at " + position(toks_[i]));
  }
};

inline bool is_keyword(std::string_view w) {
  static const std::set<std::string, std::less<>> kw = {"if", "for", "while", "switch", "return", "sizeof",
                                                         "do", "else", "case", "goto", "_Alignof", "_Generic"};
  return kw.count(w) > 0;
}

/// Name of the function whose body opens at token `brace`, or empty.
inline std::string function_name_before(std::string_view src, const std::vector<lex::Token>& toks,
                                        std::size_t brace) {
  if (brace == 0) return {};
  std::size_t j = brace - 1;
  if (toks[j].kind != lex::TokenKind::Punct || !toks[j].is(src, ")")) return {};
  int depth = 0;
  while (true) {
    const auto& t = toks[j];
    if (t.kind == lex::TokenKind::Punct) {
      if (t.is(src, ")")) ++depth;
      if (t.is(src, "(") && --depth == 0) break;
    }
    if (j == 0) return {};
    --j;
  }
  if (j == 0) return {};
  const auto& name = toks[j - 1];
  if (name.kind != lex::TokenKind::Identifier || is_keyword(name.text(src))) return {};
  return std::string(name.text(src));
}

}  // namespace detail

/// Finds every parallel, single and task construct in `source_text`.
/// Region ids start at `first_id` and increase with the pragma line.
inline std::vector<Region> scan_source(std::string_view source_text, std::string_view file,
                                       RegionId first_id = 0) {
  const auto toks = lex::tokenize(source_text);
  const detail::StatementParser parser(source_text, toks);
  std::vector<Region> regions;
  std::vector<std::size_t> open_braces;
  std::string current_function;

  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto& t = toks[i];
    if (t.kind == lex::TokenKind::Punct) {
      if (t.is(source_text, "{")) {
        if (open_braces.empty()) current_function = detail::function_name_before(source_text, toks, i);
        open_braces.push_back(i);
      } else if (t.is(source_text, "}")) {
        if (open_braces.empty()) {
          throw Error(ErrorCode::UnbalancedBraces, "unexpected '}' at " + detail::position(t));
        }
        open_braces.pop_back();
        if (open_braces.empty()) current_function.clear();
      }
      continue;
    }
    const auto kind = detail::region_kind_of(t);
    if (!kind) continue;
    if (i + 1 >= toks.size()) {
      throw Error(ErrorCode::PragmaWithoutStatement, "pragma at " + detail::position(t) + " has no statement");
    }
    const auto last = parser.statement_end(i + 1);
    Region r;
    r.id = first_id + static_cast<RegionId>(regions.size());
    r.kind = *kind;
    r.file = std::string(file);
    r.pragma_line = t.line;
    r.block_begin = toks[i + 1].line;
    r.block_end = toks[last].end_line;
    r.function = open_braces.empty() ? std::string() : current_function;
    regions.push_back(std::move(r));
  }
  if (!open_braces.empty()) {
    throw Error(ErrorCode::UnbalancedBraces, "unclosed '{' at " + detail::position(toks[open_braces.back()]));
  }
  return regions;
}

/// Parses the selection format: `function [file [start-end]]` per line,
/// `#` starts a comment.
inline InstrumentationConfig parse_config(std::string_view config_text) {
  InstrumentationConfig cfg;
  std::size_t lineno = 0;
  for (const auto& line : text::split_lines(config_text)) {
    ++lineno;
    std::string_view body = line.body;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    const auto fields = text::split_ws(body);
    if (fields.empty()) continue;
    if (fields.size() > 3) {
      throw Error(ErrorCode::MalformedRange, "line " + std::to_string(lineno) + ": too many fields");
    }
    SelectionEntry e;
    e.function = std::string(fields[0]);
    if (fields.size() > 1) e.file = std::string(fields[1]);
    if (fields.size() > 2) {
      const auto parts = text::split(fields[2], '-');
      std::optional<std::size_t> lo, hi;
      if (parts.size() == 2) {
        lo = text::parse_int<std::size_t>(parts[0]);
        hi = text::parse_int<std::size_t>(parts[1]);
      }
      if (!lo || !hi || *lo > *hi) {
        throw Error(ErrorCode::MalformedRange,
                    "line " + std::to_string(lineno) + ": bad line range '" + std::string(fields[2]) + "'");
      }
      e.line_range = std::make_pair(*lo, *hi);
    }
    cfg.entries.push_back(std::move(e));
  }
  return cfg;
}

inline bool matches(const SelectionEntry& e, const Region& r) {
  if (e.function != r.function) return false;
  if (e.file && text::basename(*e.file) != text::basename(r.file)) return false;
  if (e.line_range && (r.pragma_line < e.line_range->first || r.pragma_line > e.line_range->second)) return false;
  return true;
}

/// Regions matched by at least one entry (all regions for an empty config).
/// Entries that match nothing are reported in `warnings`.
inline std::vector<Region> select_regions(const std::vector<Region>& regions, const InstrumentationConfig& config,
                                          Diagnostics* warnings = nullptr) {
  std::vector<Region> out;
  if (config.entries.empty()) {
    out = regions;
  } else {
    std::vector<bool> used(config.entries.size(), false);
    for (const auto& r : regions) {
      bool selected = false;
      for (std::size_t k = 0; k < config.entries.size(); ++k) {
        if (matches(config.entries[k], r)) {
          used[k] = true;
          selected = true;
        }
      }
      if (selected) out.push_back(r);
    }
    if (warnings) {
      for (std::size_t k = 0; k < used.size(); ++k) {
        if (!used[k]) {
          warnings->push_back({"UnmatchedEntry", "config entry '" + config.entries[k].function + "' matched no region"});
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Region& a, const Region& b) { return a.id < b.id; });
  out.erase(std::unique(out.begin(), out.end(), [](const Region& a, const Region& b) { return a.id == b.id; }),
            out.end());
  return out;
}

}  // namespace pdttagger
