#pragma once

// Decision-tree advisor: maps counter-derived features to the SMT multiplier
// (1x, 2x or 4x the core count) expected to run a region fastest.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pdttagger/counters.hpp"
#include "pdttagger/error.hpp"
#include "pdttagger/text.hpp"

namespace pdttagger {

enum class SmtClass { SMT1 = 0, SMT2 = 1, SMT4 = 2 };

inline constexpr std::size_t kNumClasses = 3;

constexpr std::string_view to_string(SmtClass c) {
  switch (c) {
    case SmtClass::SMT1: return "SMT1";
    case SmtClass::SMT2: return "SMT2";
    case SmtClass::SMT4: return "SMT4";
  }
  return "SMT1";
}

inline std::optional<SmtClass> parse_smt_class(std::string_view s) {
  if (s == "SMT1") return SmtClass::SMT1;
  if (s == "SMT2") return SmtClass::SMT2;
  if (s == "SMT4") return SmtClass::SMT4;
  return std::nullopt;
}

inline int recommend_threads(SmtClass c, int cores) {
  if (cores < 1) throw Error(ErrorCode::InvalidArgument, "core count must be positive");
  switch (c) {
    case SmtClass::SMT1: return cores;
    case SmtClass::SMT2: return 2 * cores;
    case SmtClass::SMT4: return 4 * cores;
  }
  return cores;
}

struct LabeledSample {
  std::vector<double> features;  // in Dataset::feature_names order
  SmtClass label = SmtClass::SMT1;
  double weight = 1;
};

struct Dataset {
  std::vector<std::string> feature_names{kFeatureNames.begin(), kFeatureNames.end()};
  std::vector<LabeledSample> samples;
};

inline LabeledSample make_sample(const FeatureVector& f, SmtClass label, double weight = 1) {
  return {f.values(), label, weight};
}

struct TrainOptions {
  int max_depth = 4;  // negative: unlimited
  std::size_t min_samples_leaf = 1;
};

struct TreeNode {
  bool leaf = true;
  // internal: feature <= threshold goes left
  std::string feature;
  double threshold = 0;
  std::size_t left = 0;
  std::size_t right = 0;
  // leaf
  SmtClass cls = SmtClass::SMT1;
  std::array<double, kNumClasses> counts{};

  bool operator==(const TreeNode&) const = default;
};

/// Nodes in preorder; nodes[0] is the root. Equality compares structure only.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  TrainOptions options;

  bool operator==(const DecisionTree& o) const { return nodes == o.nodes; }

  std::size_t depth() const { return nodes.empty() ? 0 : depth_of(0); }

 private:
  std::size_t depth_of(std::size_t i) const {
    const auto& n = nodes[i];
    return n.leaf ? 0 : 1 + std::max(depth_of(n.left), depth_of(n.right));
  }
};

/// Weighted Gini impurity of a class distribution.
inline double gini(const std::array<double, kNumClasses>& w) {
  const double total = w[0] + w[1] + w[2];
  if (total <= 0) return 0;
  double s = 0;
  for (double x : w) s += (x / total) * (x / total);
  return 1.0 - s;
}

namespace detail {

/// Majority class; ties go to the lower class.
inline SmtClass majority(const std::array<double, kNumClasses>& w) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k) {
    if (w[k] > w[best]) best = k;
  }
  return static_cast<SmtClass>(best);
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const TrainOptions& opts) : data_(data), opts_(opts) {}

  DecisionTree build() {
    std::vector<std::size_t> all(data_.samples.size());
    std::iota(all.begin(), all.end(), 0);
    DecisionTree t;
    t.options = opts_;
    nodes_ = &t.nodes;
    grow(all, 0);
    return t;
  }

 private:
  struct Split {
    std::size_t feature = 0;
    double threshold = 0;
    double impurity = 0;
  };

  const Dataset& data_;
  TrainOptions opts_;
  std::vector<TreeNode>* nodes_ = nullptr;

  std::array<double, kNumClasses> distribution(const std::vector<std::size_t>& idx) const {
    std::array<double, kNumClasses> w{};
    for (auto i : idx) w[static_cast<std::size_t>(data_.samples[i].label)] += data_.samples[i].weight;
    return w;
  }

  std::optional<Split> best_split(const std::vector<std::size_t>& idx) const {
    std::optional<Split> best;
    const std::size_t nf = data_.feature_names.size();
    for (std::size_t f = 0; f < nf; ++f) {
      auto sorted = idx;
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return data_.samples[a].features[f] < data_.samples[b].features[f];
      });
      std::array<double, kNumClasses> left{};
      auto right = distribution(sorted);
      const double total = right[0] + right[1] + right[2];
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        const auto& s = data_.samples[sorted[k]];
        left[static_cast<std::size_t>(s.label)] += s.weight;
        right[static_cast<std::size_t>(s.label)] -= s.weight;
        const double a = s.features[f];
        const double b = data_.samples[sorted[k + 1]].features[f];
        if (!(a < b)) continue;
        const std::size_t n_left = k + 1;
        const std::size_t n_right = sorted.size() - n_left;
        if (n_left < opts_.min_samples_leaf || n_right < opts_.min_samples_leaf) continue;
        double threshold = a + (b - a) / 2;
        if (!(threshold < b)) threshold = a;
        const double wl = left[0] + left[1] + left[2];
        const double wr = total - wl;
        const double imp = (wl * gini(left) + wr * gini(right)) / total;
        if (!best || imp < best->impurity) best = Split{f, threshold, imp};
      }
    }
    return best;
  }

  std::size_t grow(const std::vector<std::size_t>& idx, int depth) {
    const auto dist = distribution(idx);
    const std::size_t me = nodes_->size();
    nodes_->push_back({});
    std::size_t classes_present = 0;
    std::array<bool, kNumClasses> present{};
    for (auto i : idx) present[static_cast<std::size_t>(data_.samples[i].label)] = true;
    for (bool p : present) classes_present += p ? 1 : 0;

    const bool depth_limited = opts_.max_depth >= 0 && depth >= opts_.max_depth;
    std::optional<Split> split;
    if (classes_present > 1 && !depth_limited && idx.size() >= 2 * std::max<std::size_t>(1, opts_.min_samples_leaf)) {
      split = best_split(idx);
    }
    if (!split) {
      auto& n = (*nodes_)[me];
      n.leaf = true;
      n.cls = majority(dist);
      n.counts = dist;
      return me;
    }
    std::vector<std::size_t> l, r;
    for (auto i : idx) (data_.samples[i].features[split->feature] <= split->threshold ? l : r).push_back(i);
    {
      auto& n = (*nodes_)[me];
      n.leaf = false;
      n.feature = data_.feature_names[split->feature];
      n.threshold = split->threshold;
    }
    const auto li = grow(l, depth + 1);
    const auto ri = grow(r, depth + 1);
    (*nodes_)[me].left = li;
    (*nodes_)[me].right = ri;
    return me;
  }
};

}  // namespace detail

/// Greedy top-down induction minimizing weighted Gini impurity over midpoint
/// thresholds. Ties between splits go to the lower feature index, then the
/// lower threshold.
inline DecisionTree train(const Dataset& data, const TrainOptions& opts = {}) {
  if (data.samples.empty()) throw Error(ErrorCode::EmptyDataset, "no training samples");
  for (const auto& s : data.samples) {
    if (s.features.size() != data.feature_names.size()) {
      throw Error(ErrorCode::InvalidArgument, "sample has " + std::to_string(s.features.size()) + " features, expected " +
                                                  std::to_string(data.feature_names.size()));
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite feature value");
    }
    if (!(s.weight > 0)) throw Error(ErrorCode::InvalidArgument, "sample weights must be positive");
  }
  return detail::TreeBuilder(data, opts).build();
}

/// Routes by feature name; `value_of` returns the value of a named feature.
template <typename Lookup>
SmtClass predict_with(const DecisionTree& tree, Lookup&& value_of) {
  if (tree.nodes.empty()) throw Error(ErrorCode::InvalidArgument, "empty tree");
  std::size_t i = 0;
  while (!tree.nodes[i].leaf) {
    const auto& n = tree.nodes[i];
    i = value_of(n.feature) <= n.threshold ? n.left : n.right;
  }
  return tree.nodes[i].cls;
}

inline SmtClass predict(const DecisionTree& tree, const std::vector<std::string>& names,
                        const std::vector<double>& values) {
  return predict_with(tree, [&](const std::string& feature) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (names[k] == feature) return values.at(k);
    }
    throw Error(ErrorCode::InvalidArgument, "tree needs feature '" + feature + "'");
  });
}

inline SmtClass predict(const DecisionTree& tree, const FeatureVector& f) {
  static const std::vector<std::string> names(kFeatureNames.begin(), kFeatureNames.end());
  return predict(tree, names, f.values());
}

inline double training_accuracy(const DecisionTree& tree, const Dataset& data) {
  if (data.samples.empty()) return 0;
  std::size_t ok = 0;
  for (const auto& s : data.samples) ok += predict(tree, data.feature_names, s.features) == s.label ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(data.samples.size());
}

// ---------------------------------------------------------------------------
// Tree file: preorder "node <feature> <threshold>" / "leaf <class> <counts...>".

inline std::string export_tree(const DecisionTree& tree) {
  std::ostringstream os;
  auto emit = [&](auto&& self, std::size_t i) -> void {
    const auto& n = tree.nodes[i];
    if (n.leaf) {
      os << "leaf " << to_string(n.cls);
      for (double c : n.counts) os << ' ' << text::format_shortest(c);
      os << '\n';
      return;
    }
    os << "node " << n.feature << ' ' << text::format_shortest(n.threshold) << '\n';
    self(self, n.left);
    self(self, n.right);
  };
  if (!tree.nodes.empty()) emit(emit, 0);
  return os.str();
}

inline DecisionTree import_tree(std::string_view tree_text) {
  std::vector<std::pair<std::size_t, std::string>> lines;  // (line number, body)
  std::size_t lineno = 0;
  for (const auto& l : text::split_lines(tree_text)) {
    ++lineno;
    if (!text::trim(l.body).empty()) lines.emplace_back(lineno, l.body);
  }
  DecisionTree tree;
  std::size_t next = 0;
  auto fail = [](std::size_t line, const std::string& what) {
    return Error(ErrorCode::TreeSyntax, "line " + std::to_string(line) + ": " + what);
  };
  auto parse = [&](auto&& self) -> std::size_t {
    if (next >= lines.size()) throw fail(lineno + 1, "unexpected end of tree");
    const auto [ln, body] = lines[next++];
    const auto f = text::split_ws(body);
    const std::size_t me = tree.nodes.size();
    tree.nodes.push_back({});
    if (f[0] == "leaf") {
      const auto cls = f.size() == 2 + kNumClasses ? parse_smt_class(f[1]) : std::nullopt;
      if (!cls) throw fail(ln, "expected 'leaf <class> <count> <count> <count>'");
      TreeNode n;
      n.cls = *cls;
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        const auto c = text::parse_double(f[2 + k]);
        if (!c || !std::isfinite(*c) || *c < 0) throw fail(ln, "bad class count '" + std::string(f[2 + k]) + "'");
        n.counts[k] = *c;
      }
      tree.nodes[me] = n;
      return me;
    }
    if (f[0] == "node") {
      const auto thr = f.size() == 3 ? text::parse_double(f[2]) : std::nullopt;
      if (!thr || !std::isfinite(*thr)) throw fail(ln, "expected 'node <feature> <threshold>'");
      TreeNode n;
      n.leaf = false;
      n.feature = std::string(f[1]);
      n.threshold = *thr;
      tree.nodes[me] = n;
      const auto l = self(self);
      const auto r = self(self);
      tree.nodes[me].left = l;
      tree.nodes[me].right = r;
      return me;
    }
    throw fail(ln, "unknown record '" + std::string(f[0]) + "'");
  };
  if (lines.empty()) throw fail(1, "empty tree");
  parse(parse);
  if (next != lines.size()) throw fail(lines[next].first, "trailing content after complete tree");
  return tree;
}

// ---------------------------------------------------------------------------
// Dataset file: "pdtdataset v1 [feature names...]" then per line the
// feature values followed by the label token.

inline std::string emit_dataset(const Dataset& data) {
  std::ostringstream os;
  os << "pdtdataset v1";
  const bool canonical = std::equal(data.feature_names.begin(), data.feature_names.end(), kFeatureNames.begin(),
                                    kFeatureNames.end());
  if (!canonical) {
    for (const auto& n : data.feature_names) os << ' ' << n;
  }
  os << '\n';
  for (const auto& s : data.samples) {
    for (double v : s.features) os << text::format_shortest(v) << ' ';
    os << to_string(s.label) << '\n';
  }
  return os.str();
}

inline Dataset parse_dataset(std::string_view dataset_text) {
  auto fail = [](std::size_t line, const std::string& what) {
    return Error(ErrorCode::DatasetSyntax, "line " + std::to_string(line) + ": " + what);
  };
  const auto lines = text::split_lines(dataset_text);
  if (lines.empty()) throw fail(1, "missing header");
  const auto header = text::split_ws(lines[0].body);
  if (header.size() < 2 || header[0] != "pdtdataset" || header[1] != "v1") throw fail(1, "bad header");
  Dataset d;
  if (header.size() > 2) d.feature_names.assign(header.begin() + 2, header.end());
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = text::split_ws(lines[n].body);
    if (f.empty() || f[0].front() == '#') continue;
    if (f.size() != d.feature_names.size() + 1) {
      throw fail(n + 1, "expected " + std::to_string(d.feature_names.size()) + " values and a label");
    }
    LabeledSample s;
    for (std::size_t k = 0; k < d.feature_names.size(); ++k) {
      const auto v = text::parse_double(f[k]);
      if (!v || !std::isfinite(*v)) throw fail(n + 1, "bad value '" + std::string(f[k]) + "'");
      s.features.push_back(*v);
    }
    const auto label = parse_smt_class(f.back());
    if (!label) throw fail(n + 1, "bad label '" + std::string(f.back()) + "'");
    s.label = *label;
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace pdttagger
