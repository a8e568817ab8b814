#pragma once

// Shared helpers for the test binaries: paths, temp dirs, XML checking.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pdttagger/text.hpp"

#ifndef PDTTAGGER_SOURCE_DIR
#error "PDTTAGGER_SOURCE_DIR must be defined"
#endif

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(PDTTAGGER_SOURCE_DIR); }
inline fs::path fixture(std::string_view name) { return source_dir() / "tests" / "fixtures" / name; }
inline fs::path golden(std::string_view name) { return source_dir() / "tests" / "golden" / name; }
inline fs::path data(std::string_view name) { return source_dir() / "data" / name; }

inline const std::vector<std::string>& corpus_names() {
  static const std::vector<std::string> names = {"floorplan", "health", "nqueens", "sparselu", "strassen"};
  return names;
}

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "pdttagger") {
    static std::mt19937_64 rng(std::random_device{}());
    for (;;) {
      path_ = fs::temp_directory_path() / (std::string(tag) + "-" + std::to_string(rng()));
      if (fs::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(std::string_view name) const { return path_ / name; }

 private:
  fs::path path_;
};

/// Minimal XML 1.0 well-formedness check: one root element, matched tags,
/// quoted unique attributes, known entities, optional declaration and
/// comments. Counts elements by name.
struct XmlCheck {
  bool ok = false;
  std::string error;
  std::string root;
  std::map<std::string, int> element_counts;
};

inline XmlCheck check_xml(std::string_view s) {
  XmlCheck r;
  std::size_t i = 0;
  std::vector<std::string> open;
  bool seen_root = false;
  auto fail = [&](const std::string& what) {
    r.ok = false;
    r.error = what + " at offset " + std::to_string(i);
    return r;
  };
  auto is_name_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':'; };
  auto is_name_char = [&](char c) {
    return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.';
  };
  auto skip_ws = [&] {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  };
  auto name = [&]() -> std::string {
    const auto b = i;
    if (i >= s.size() || !is_name_start(s[i])) return {};
    while (i < s.size() && is_name_char(s[i])) ++i;
    return std::string(s.substr(b, i - b));
  };
  auto check_text = [&](std::string_view t) -> bool {
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k] == '<') return false;
      if (t[k] == '&') {
        const auto semi = t.find(';', k);
        if (semi == std::string_view::npos) return false;
        const auto ent = t.substr(k + 1, semi - k - 1);
        if (ent != "amp" && ent != "lt" && ent != "gt" && ent != "quot" && ent != "apos" &&
            !(ent.size() > 1 && ent[0] == '#')) {
          return false;
        }
        k = semi;
      }
    }
    return true;
  };

  if (s.substr(0, 5) == "<?xml") {
    const auto e = s.find("?>");
    if (e == std::string_view::npos) return fail("unterminated declaration");
    i = e + 2;
  }
  while (i < s.size()) {
    if (s[i] != '<') {
      const auto e = s.find('<', i);
      const auto t = s.substr(i, e == std::string_view::npos ? s.size() - i : e - i);
      if (open.empty()) {
        for (char c : t) {
          if (!std::isspace(static_cast<unsigned char>(c))) return fail("text outside the root element");
        }
      } else if (!check_text(t)) {
        return fail("bad character data");
      }
      i += t.size();
      continue;
    }
    if (s.substr(i, 4) == "<!--") {
      const auto e = s.find("-->", i + 4);
      if (e == std::string_view::npos) return fail("unterminated comment");
      i = e + 3;
      continue;
    }
    if (s.substr(i, 2) == "</") {
      i += 2;
      const auto n = name();
      skip_ws();
      if (i >= s.size() || s[i] != '>') return fail("bad end tag");
      ++i;
      if (open.empty() || open.back() != n) return fail("mismatched end tag </" + n + ">");
      open.pop_back();
      continue;
    }
    ++i;
    const auto n = name();
    if (n.empty()) return fail("bad tag name");
    if (open.empty()) {
      if (seen_root) return fail("second root element");
      seen_root = true;
      r.root = n;
    }
    ++r.element_counts[n];
    std::vector<std::string> attrs;
    for (;;) {
      const auto before = i;
      skip_ws();
      if (i >= s.size()) return fail("unterminated tag");
      if (s[i] == '>') {
        ++i;
        open.push_back(n);
        break;
      }
      if (s.substr(i, 2) == "/>") {
        i += 2;
        break;
      }
      if (i == before) return fail("missing space before attribute");
      const auto a = name();
      if (a.empty()) return fail("bad attribute name");
      for (const auto& x : attrs) {
        if (x == a) return fail("duplicate attribute " + a);
      }
      attrs.push_back(a);
      skip_ws();
      if (i >= s.size() || s[i] != '=') return fail("expected '='");
      ++i;
      skip_ws();
      if (i >= s.size() || (s[i] != '"' && s[i] != '\'')) return fail("unquoted attribute");
      const char q = s[i++];
      const auto e = s.find(q, i);
      if (e == std::string_view::npos) return fail("unterminated attribute");
      if (!check_text(s.substr(i, e - i))) return fail("bad attribute value");
      i = e + 1;
    }
  }
  if (!open.empty()) return fail("unclosed element <" + open.back() + ">");
  if (!seen_root) return fail("no root element");
  r.ok = true;
  return r;
}

}  // namespace testsupport
