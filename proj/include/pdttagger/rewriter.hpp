#pragma once

// Source-to-source instrumentation of selected regions, the inverse strip
// transformation, and the region manifest file format.

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pdttagger/error.hpp"
#include "pdttagger/lexer.hpp"
#include "pdttagger/pragma_scan.hpp"
#include "pdttagger/text.hpp"

namespace pdttagger {

struct InstrumentationOptions {
  bool inject_thread_clause = true;
  std::string marker_comment = "/*@pdttagger@*/";
  std::string hook_prefix = "pdt";
  std::string hooks_header = "pdttagger_hooks.h";
};

struct RegionManifest {
  std::vector<Region> entries;  // original-file coordinates, ascending id
  std::string source_digest;    // 16 hex digits

  bool operator==(const RegionManifest&) const = default;
};

struct InstrumentResult {
  std::string text;
  RegionManifest manifest;
};

/// Digest over an ordered list of source texts.
inline std::string source_digest(const std::vector<std::string_view>& sources) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto s : sources) {
    h = text::fnv1a(s, h);
    h = text::fnv1a(std::string_view("\0", 1), h);
  }
  return text::hex64(h);
}

inline std::string source_digest(std::string_view source) { return source_digest(std::vector{source}); }

namespace detail {

inline std::string clause_text(const InstrumentationOptions& opts, RegionId id) {
  return " num_threads(" + opts.hook_prefix + "_region_threads(" + std::to_string(id) + "))";
}

inline std::string leading_ws(std::string_view s) {
  const auto n = s.find_first_not_of(" \t");
  return std::string(s.substr(0, n == std::string_view::npos ? s.size() : n));
}

/// True when the pragma at token `i` is the unbraced body of a statement, so
/// inserting a line in front of it would steal that position.
inline bool in_statement_position(std::string_view src, const std::vector<lex::Token>& toks, std::size_t i) {
  std::size_t j = i;
  while (j > 0) {
    --j;
    const auto& t = toks[j];
    if (t.kind == lex::TokenKind::Directive) {
      if (!is_pragma(t)) continue;  // conditional compilation is transparent
      return !is_standalone_omp(t);
    }
    if (t.kind == lex::TokenKind::Punct) return t.is(src, ")");
    if (t.kind == lex::TokenKind::Identifier) return t.is(src, "else") || t.is(src, "do");
    return false;
  }
  return false;
}

}  // namespace detail

/// Inserts begin/end hooks around every selected region and, for parallel
/// constructs, a num_threads clause consulting the thread plan.
inline InstrumentResult instrument(std::string_view source_text, const std::vector<Region>& selected,
                                   const InstrumentationOptions& opts = {}) {
  if (opts.marker_comment.empty()) throw Error(ErrorCode::InvalidArgument, "empty marker comment");
  if (source_text.find(opts.marker_comment) != std::string_view::npos) {
    throw Error(ErrorCode::AlreadyInstrumented, "source already carries marker " + opts.marker_comment);
  }

  InstrumentResult result;
  result.manifest.source_digest = source_digest(source_text);
  if (selected.empty()) {
    result.text = std::string(source_text);
    return result;
  }

  const auto toks = lex::tokenize(source_text);
  const detail::StatementParser parser(source_text, toks);
  const auto scanned = scan_source(source_text, selected.front().file);

  auto lines = text::split_lines(source_text);
  const std::string eol = (!lines.empty() && !lines.front().newline.empty()) ? lines.front().newline : "\n";
  const std::string tag = " " + opts.marker_comment;

  // Inserted lines keyed by original line number.
  std::map<std::size_t, std::vector<std::string>> before;
  std::map<std::size_t, std::vector<std::pair<std::size_t, std::string>>> after;  // (pragma_line, text)
  std::map<std::size_t, std::pair<std::size_t, std::string>> clause_at;  // line -> (column offset, text)

  auto sorted = selected;
  std::sort(sorted.begin(), sorted.end(), [](const Region& a, const Region& b) { return a.id < b.id; });
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    if (sorted[k].id == sorted[k - 1].id) {
      throw Error(ErrorCode::InvalidArgument, "duplicate region id " + std::to_string(sorted[k].id));
    }
  }

  for (const auto& r : sorted) {
    const auto found = std::find_if(scanned.begin(), scanned.end(), [&](const Region& s) {
      return s.pragma_line == r.pragma_line && s.kind == r.kind && s.block_begin == r.block_begin &&
             s.block_end == r.block_end;
    });
    if (found == scanned.end()) {
      throw Error(ErrorCode::RegionNotFound, "region " + std::to_string(r.id) + " (" + std::string(to_string(r.kind)) +
                                                 " at line " + std::to_string(r.pragma_line) +
                                                 ") does not match the source");
    }
    std::size_t ti = 0;
    while (ti < toks.size() && !(toks[ti].kind == lex::TokenKind::Directive && toks[ti].line == r.pragma_line)) ++ti;
    const auto last = parser.statement_end(ti + 1);
    if (last + 1 < toks.size() && toks[last + 1].line == toks[last].end_line) {
      throw Error(ErrorCode::UnsupportedLayout, "code follows the block of region " + std::to_string(r.id) +
                                                    " on line " + std::to_string(r.block_end));
    }

    const bool wrap = detail::in_statement_position(source_text, toks, ti);
    const std::string indent = detail::leading_ws(lines[r.pragma_line - 1].body);
    const std::string id = std::to_string(r.id);
    before[r.pragma_line].push_back(indent + (wrap ? "{ " : "") + opts.hook_prefix + "_region_begin(" + id + ");" +
                                    tag);
    after[r.block_end].emplace_back(r.pragma_line, indent + opts.hook_prefix + "_region_end(" + id + ");" +
                                                       (wrap ? " }" : "") + tag);

    const auto words = detail::omp_words(toks[ti].logical);
    const bool has_clause = std::find(words.begin(), words.end(), "num_threads") != words.end();
    if (opts.inject_thread_clause && is_parallel(r.kind) && !has_clause) {
      // code_end may sit on a continuation line; locate its physical line.
      std::size_t line = 1;
      std::size_t line_start = 0;
      for (std::size_t p = 0; p < toks[ti].code_end; ++p) {
        if (source_text[p] == '\n') {
          ++line;
          line_start = p + 1;
        }
      }
      clause_at[line] = {toks[ti].code_end - line_start, detail::clause_text(opts, r.id) + tag};
    }
  }

  std::vector<text::Line> out;
  out.reserve(lines.size() + 2 * sorted.size() + 1);
  out.push_back({"#include \"" + opts.hooks_header + "\"" + tag, eol});
  for (std::size_t n = 1; n <= lines.size(); ++n) {
    if (auto it = before.find(n); it != before.end()) {
      for (auto& s : it->second) out.push_back({s, eol});
    }
    auto line = lines[n - 1];
    if (auto it = clause_at.find(n); it != clause_at.end()) line.body.insert(it->second.first, it->second.second);
    out.push_back(line);
    if (auto it = after.find(n); it != after.end()) {
      auto& ends = it->second;
      std::stable_sort(ends.begin(), ends.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      if (out.back().newline.empty()) {
        out.back().newline = eol;
        for (auto& e : ends) out.push_back({e.second, eol});
        out.back().newline.clear();
      } else {
        for (auto& e : ends) out.push_back({e.second, eol});
      }
    }
  }
  result.text = text::join_lines(out);
  result.manifest.entries = sorted;
  return result;
}

/// Removes everything `instrument` added. Any line carrying the marker is
/// deleted unless it is a pragma line with an injected clause, in which case
/// only the clause and marker are removed.
inline std::string strip(std::string_view instrumented_text, const InstrumentationOptions& opts = {}) {
  if (instrumented_text.find(opts.marker_comment) == std::string_view::npos) return std::string(instrumented_text);
  const std::string clause_head = " num_threads(" + opts.hook_prefix + "_region_threads(";
  std::vector<text::Line> out;
  for (auto& line : text::split_lines(instrumented_text)) {
    const auto m = line.body.find(opts.marker_comment);
    if (m == std::string::npos) {
      out.push_back(std::move(line));
      continue;
    }
    // Injected clause: " num_threads(P_region_threads(<digits>)) <marker>"
    bool restored = false;
    const auto c = (m >= 1) ? line.body.rfind(clause_head, m - 1) : std::string::npos;
    if (c != std::string::npos) {
      std::size_t p = c + clause_head.size();
      const std::size_t digits_begin = p;
      while (p < m && line.body[p] >= '0' && line.body[p] <= '9') ++p;
      if (p > digits_begin && line.body.compare(p, 3, ")) ") == 0 && p + 3 == m) {
        line.body.erase(c, m + opts.marker_comment.size() - c);
        out.push_back(std::move(line));
        restored = true;
      }
    }
    if (!restored && line.newline.empty() && !out.empty()) out.back().newline.clear();
  }
  return text::join_lines(out);
}

inline std::string emit_manifest(const RegionManifest& manifest) {
  auto entries = manifest.entries;
  std::sort(entries.begin(), entries.end(), [](const Region& a, const Region& b) { return a.id < b.id; });
  std::ostringstream os;
  os << "pdtmanifest v1 " << manifest.source_digest << '\n';
  for (const auto& r : entries) {
    os << r.id << '\t' << to_string(r.kind) << '\t' << r.file << '\t' << r.function << '\t' << r.pragma_line << '\t'
       << r.block_begin << '\t' << r.block_end << '\n';
  }
  return os.str();
}

inline RegionManifest parse_manifest(std::string_view manifest_text) {
  auto fail = [](std::size_t line, const std::string& what) -> Error {
    return Error(ErrorCode::ManifestSyntax, "line " + std::to_string(line) + ": " + what);
  };
  const auto lines = text::split_lines(manifest_text);
  if (lines.empty()) throw fail(1, "missing header");
  const auto header = text::split_ws(lines[0].body);
  if (header.size() != 3 || header[0] != "pdtmanifest" || header[1] != "v1") throw fail(1, "bad header");
  RegionManifest m;
  m.source_digest = std::string(header[2]);
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto& body = lines[n].body;
    if (body.empty()) continue;
    const auto f = text::split(body, '\t');
    if (f.size() != 7) throw fail(n + 1, "expected 7 tab-separated fields");
    Region r;
    const auto id = text::parse_int<RegionId>(f[0]);
    const auto kind = parse_region_kind(f[1]);
    const auto pl = text::parse_int<std::size_t>(f[4]);
    const auto bb = text::parse_int<std::size_t>(f[5]);
    const auto be = text::parse_int<std::size_t>(f[6]);
    if (!id || *id < 0) throw fail(n + 1, "bad region id");
    if (!kind) throw fail(n + 1, "unknown region kind '" + std::string(f[1]) + "'");
    if (!pl || !bb || !be || !(*pl <= *bb && *bb <= *be)) throw fail(n + 1, "bad line numbers");
    if (!m.entries.empty() && m.entries.back().id >= *id) throw fail(n + 1, "ids not ascending");
    r.id = *id;
    r.kind = *kind;
    r.file = std::string(f[2]);
    r.function = std::string(f[3]);
    r.pragma_line = *pl;
    r.block_begin = *bb;
    r.block_end = *be;
    m.entries.push_back(std::move(r));
  }
  return m;
}

/// Checks the manifest digest against the original sources.
inline void verify_manifest(const RegionManifest& manifest, const std::vector<std::string_view>& sources) {
  const auto actual = source_digest(sources);
  if (actual != manifest.source_digest) {
    throw Error(ErrorCode::DigestMismatch, "manifest digest " + manifest.source_digest + " != source digest " + actual);
  }
}

}  // namespace pdttagger
