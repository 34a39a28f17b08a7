#include "tabxfer/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "tabxfer/assignment.hpp"
#include "tabxfer/embed.hpp"
#include "tabxfer/error.hpp"
#include "tabxfer/kernels.hpp"
#include "tabxfer/kv.hpp"
#include "tabxfer/random.hpp"

namespace tabxfer {
namespace {

constexpr double kIncompatiblePenalty = -10.0;

void require_finite(const Matrix& m, const char* what) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) raise(ErrorCode::NonFiniteInput, std::string(what) + " contains a non-finite value");
  }
}

Matrix stack_rows(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(a.data().size()));
  return out;
}

Matrix sorted_rows(const Matrix& m) {
  std::vector<std::size_t> order(m.rows());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    auto rx = m.row(x);
    auto ry = m.row(y);
    for (std::size_t k = 0; k < rx.size(); ++k) {
      if (rx[k] != ry[k]) return rx[k] < ry[k];
    }
    return x < y;
  });
  return m.select_rows(order);
}

double median_value(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> present_values(const LabeledTable& t, std::size_t col) {
  std::vector<double> out;
  out.reserve(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    if (!t.is_missing(i, col)) out.push_back(t.features(i, col));
  }
  if (out.empty()) out = t.features.column(col);
  return out;
}

bool is_categorical(const LabeledTable& t, std::size_t col) {
  return t.column_kinds[col] == ColumnKind::CategoricalEncoded;
}

struct Profile {
  double mean = 0.0, std = 0.0, skew = 0.0, distinct_ratio = 0.0;
};

Profile profile_of(const TableView& v, std::size_t col) {
  Profile p;
  const ColumnSchema& cs = v.schema.columns[col];
  const std::size_t present = v.table.rows() - cs.missing_count;
  p.distinct_ratio = present ? static_cast<double>(cs.distinct_count) / static_cast<double>(present) : 0.0;
  if (cs.stats) {
    p.mean = cs.stats->mean;
    p.std = cs.stats->std;
    p.skew = cs.stats->skewness;
  }
  return p;
}

AffineTransform standardizing_affine(const std::vector<double>& source, const std::vector<double>& target) {
  const NumericSummary s = summarize(source);
  const NumericSummary t = summarize(target);
  AffineTransform a;
  a.scale = (s.std > 0.0 && t.std > 0.0) ? t.std / s.std : 1.0;
  if (!std::isfinite(a.scale) || a.scale == 0.0) a.scale = 1.0;
  a.shift = t.mean - a.scale * s.mean;
  return a;
}

std::vector<std::size_t> frequency_order(const LabeledTable& t, std::size_t col, std::size_t categories) {
  std::vector<std::size_t> counts(categories, 0);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const auto code = static_cast<std::size_t>(t.features(i, col));
    if (code < categories) ++counts[code];
  }
  std::vector<std::size_t> order(categories);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  return order;
}

// Exact category-string matches first; remaining source categories follow
// frequency rank onto the remaining target categories, surplus onto the
// target's most frequent category.
std::vector<double> category_code_map(const LabeledTable& source, std::size_t s_col,
                                      const LabeledTable& target, std::size_t t_col) {
  const auto& s_dict = source.categories[s_col];
  const auto& t_dict = target.categories[t_col];
  std::vector<double> out(s_dict.size(), -1.0);
  std::vector<char> target_used(t_dict.size(), 0);
  for (std::size_t k = 0; k < s_dict.size(); ++k) {
    const auto it = std::find(t_dict.begin(), t_dict.end(), s_dict[k]);
    if (it != t_dict.end()) {
      const auto code = static_cast<std::size_t>(it - t_dict.begin());
      out[k] = static_cast<double>(code);
      target_used[code] = 1;
    }
  }
  const auto s_order = frequency_order(source, s_col, s_dict.size());
  const auto t_order = frequency_order(target, t_col, t_dict.size());
  std::size_t cursor = 0;
  for (std::size_t k : s_order) {
    if (out[k] >= 0.0) continue;
    while (cursor < t_order.size() && target_used[t_order[cursor]]) ++cursor;
    if (cursor < t_order.size()) {
      out[k] = static_cast<double>(t_order[cursor]);
      target_used[t_order[cursor]] = 1;
    } else {
      out[k] = t_order.empty() ? 0.0 : static_cast<double>(t_order.front());
    }
  }
  return out;
}

double assignment_affinity(const Matrix& affinity, const std::vector<int>& target_to_source) {
  double total = 0.0;
  for (std::size_t t = 0; t < target_to_source.size(); ++t) {
    if (target_to_source[t] >= 0) total += affinity(static_cast<std::size_t>(target_to_source[t]), t);
  }
  return total;
}

bool above_floor(const Matrix& affinity, const std::vector<int>& target_to_source, double floor) {
  for (std::size_t t = 0; t < target_to_source.size(); ++t) {
    const int s = target_to_source[t];
    if (s >= 0 && affinity(static_cast<std::size_t>(s), t) < floor) return false;
  }
  return true;
}

std::size_t falling_factorial(std::size_t n, std::size_t k, std::size_t limit) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < k; ++i) {
    out *= n - i;
    if (out > limit) return limit + 1;
  }
  return out;
}

// All kind-compatible injections of the narrower table's columns into the
// wider one's, as target -> source maps; empty when there are more than
// `limit` of them.
std::vector<std::vector<int>> full_assignments(const LabeledTable& source, const LabeledTable& target,
                                               std::size_t limit) {
  const std::size_t p_s = source.cols();
  const std::size_t p_t = target.cols();
  const bool source_wider = p_s >= p_t;
  const std::size_t narrow = source_wider ? p_t : p_s;
  const std::size_t wide = source_wider ? p_s : p_t;
  std::vector<std::vector<int>> out;
  if (limit == 0 || falling_factorial(wide, narrow, limit) > limit) return out;
  std::vector<int> pick(narrow, -1);
  std::vector<char> used(wide, 0);
  const auto compatible = [&](std::size_t n_col, std::size_t w_col) {
    const std::size_t s = source_wider ? w_col : n_col;
    const std::size_t t = source_wider ? n_col : w_col;
    return is_categorical(source, s) == is_categorical(target, t);
  };
  const auto emit = [&] {
    std::vector<int> t2s(p_t, -1);
    for (std::size_t i = 0; i < narrow; ++i) {
      if (source_wider) {
        t2s[i] = pick[i];
      } else {
        t2s[static_cast<std::size_t>(pick[i])] = static_cast<int>(i);
      }
    }
    out.push_back(std::move(t2s));
  };
  const auto recurse = [&](auto&& self, std::size_t depth) -> void {
    if (depth == narrow) {
      emit();
      return;
    }
    for (std::size_t w = 0; w < wide; ++w) {
      if (used[w] || !compatible(depth, w)) continue;
      used[w] = 1;
      pick[depth] = static_cast<int>(w);
      self(self, depth + 1);
      used[w] = 0;
    }
  };
  recurse(recurse, 0);
  return out;
}

Matrix standardize_by(const Matrix& m, const std::vector<double>& mean, const std::vector<double>& sd) {
  Matrix out = m;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = (m(i, j) - mean[j]) / sd[j];
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

std::string join_indices(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_double(item, what));
  return out;
}

std::vector<std::size_t> parse_indices(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    const long long v = parse_int(item, what);
    if (v < 0) raise(ErrorCode::InvalidConfig, what + ": negative index");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace

double median_heuristic_gamma(const Matrix& pooled) {
  if (pooled.rows() < 2) return 1.0;
  auto d = kernels::condensed_distances(pooled);
  const std::size_t n = d.size();
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n / 2), d.end());
  double median = d[n / 2];
  if (n % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n / 2));
    median = 0.5 * (lower + median);
  }
  if (!(median > 0.0)) return 1.0;
  return 1.0 / (2.0 * median * median);
}

double resolve_gamma(const KernelConfig& config, const Matrix& a, const Matrix* b) {
  if (config.bandwidth_mode == BandwidthMode::Fixed) {
    if (!(config.gamma > 0.0) || !std::isfinite(config.gamma)) {
      raise(ErrorCode::InvalidArgument, "kernel gamma must be positive");
    }
    return config.gamma;
  }
  return median_heuristic_gamma(b ? stack_rows(a, *b) : a);
}

Matrix gram_matrix(const Matrix& points, const KernelConfig& config) {
  if (points.rows() == 0) raise(ErrorCode::InvalidArgument, "gram matrix of an empty sample");
  require_finite(points, "gram_matrix input");
  return kernels::gaussian_gram(points, resolve_gamma(config, points));
}

double kernel_distance(const Matrix& source, const Matrix& target, const KernelConfig& config) {
  if (source.rows() != target.rows() || source.cols() != target.cols()) {
    raise(ErrorCode::SizeMismatch, "kernel_distance needs equally sized samples (" +
                                       std::to_string(source.rows()) + "x" + std::to_string(source.cols()) +
                                       " vs " + std::to_string(target.rows()) + "x" +
                                       std::to_string(target.cols()) + ")");
  }
  require_finite(source, "kernel_distance source");
  require_finite(target, "kernel_distance target");
  return kernels::gram_discrepancy(source, target, resolve_gamma(config, source, &target));
}

std::size_t matching_pool_size(std::size_t m, std::size_t available) {
  if (m == 0) return 0;
  const std::size_t by_budget = kMatchingBudget / (m * m);
  return std::min(available, std::max(m, by_budget));
}

std::pair<Matrix, Matrix> equalize_samples(const Matrix& a, const Matrix& b, std::size_t cap,
                                           std::uint64_t seed) {
  const std::size_t m = std::min({a.rows(), b.rows(), cap});
  const Matrix sa = sorted_rows(a);
  const Matrix sb = sorted_rows(b);
  const auto pos_b = subsample_rows(sb.rows(), m, derive_seed(seed, 12));
  const auto pos_a = subsample_rows(sa.rows(), matching_pool_size(m, sa.rows()), derive_seed(seed, 11));
  const Matrix pool = sa.select_rows(pos_a);
  Matrix reference = sb.select_rows(pos_b);
  if (m == 0) return {pool, reference};

  // pool rows are paired with reference rows by a min-cost matching on
  // squared Euclidean distance
  const Matrix d = kernels::euclidean_distances(pool, reference);
  Matrix score(pool.rows(), m);
  for (std::size_t i = 0; i < pool.rows(); ++i) {
    for (std::size_t j = 0; j < m; ++j) score(i, j) = -d(i, j) * d(i, j);
  }
  const std::vector<int> match = solve_assignment_hungarian(score);
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < pool.rows(); ++i) {
    if (match[i] >= 0) order[static_cast<std::size_t>(match[i])] = i;
  }
  return {pool.select_rows(order), std::move(reference)};
}

double empirical_quantile(std::span<const double> sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

QuantileMap quantile_transform(std::span<const double> source, std::span<const double> target) {
  if (source.empty() || target.empty()) raise(ErrorCode::InvalidArgument, "quantile_transform needs nonempty samples");
  std::vector<double> s(source.begin(), source.end()), t(target.begin(), target.end());
  std::sort(s.begin(), s.end());
  std::sort(t.begin(), t.end());
  QuantileMap map;
  // Runs of equal source knots collapse to one knot carrying the mean of
  // their target knots, which keeps the map a function and monotone.
  std::size_t run_length = 0;
  double run_sum = 0.0;
  for (std::size_t i = 0; i < kQuantileLevels; ++i) {
    const double q = static_cast<double>(i) / static_cast<double>(kQuantileLevels - 1);
    const double sk = empirical_quantile(s, q);
    const double tk = empirical_quantile(t, q);
    if (!map.source_knots.empty() && sk == map.source_knots.back()) {
      ++run_length;
      run_sum += tk;
      map.target_knots.back() = run_sum / static_cast<double>(run_length);
    } else {
      map.source_knots.push_back(sk);
      map.target_knots.push_back(tk);
      run_length = 1;
      run_sum = tk;
    }
  }
  return map;
}

double QuantileMap::apply(double x) const {
  if (source_knots.empty()) return x;
  if (x <= source_knots.front()) return target_knots.front();
  if (x >= source_knots.back()) return target_knots.back();
  const auto it = std::upper_bound(source_knots.begin(), source_knots.end(), x);
  const auto hi = static_cast<std::size_t>(it - source_knots.begin());
  const std::size_t lo = hi - 1;
  const double span = source_knots[hi] - source_knots[lo];
  const double w = (x - source_knots[lo]) / span;
  return target_knots[lo] + w * (target_knots[hi] - target_knots[lo]);
}

bool QuantileMap::monotone() const {
  if (source_knots.size() != target_knots.size()) return false;
  for (std::size_t i = 1; i < source_knots.size(); ++i) {
    if (source_knots[i] < source_knots[i - 1] || target_knots[i] < target_knots[i - 1]) return false;
  }
  return true;
}

double ColumnTransform::apply(double x) const {
  if (category_codes) {
    const auto code = static_cast<long long>(std::llround(x));
    if (code >= 0 && static_cast<std::size_t>(code) < category_codes->size()) {
      return (*category_codes)[static_cast<std::size_t>(code)];
    }
    return category_codes->empty() ? 0.0 : (*category_codes)[0];
  }
  const double y = affine.apply(x);
  return quantile ? quantile->apply(y) : y;
}

void FeatureMapping::validate() const {
  const std::size_t p_t = target_columns.size();
  const std::size_t p_s = source_columns.size();
  std::vector<int> target_seen(p_t, 0), source_seen(p_s, 0);
  for (const auto& pair : assignment) {
    if (pair.target_column >= p_t || pair.source_column >= p_s) {
      raise(ErrorCode::InvalidArgument, "mapping pair references a column out of range");
    }
    ++target_seen[pair.target_column];
    ++source_seen[pair.source_column];
    const auto& a = pair.transform.affine;
    if (!std::isfinite(a.scale) || a.scale == 0.0 || !std::isfinite(a.shift)) {
      raise(ErrorCode::InvalidArgument, "affine scale must be finite and nonzero");
    }
    if (pair.transform.quantile && !pair.transform.quantile->monotone()) {
      raise(ErrorCode::InvalidArgument, "quantile table is not monotone");
    }
  }
  for (std::size_t t : unmatched_target_columns) {
    if (t >= p_t) raise(ErrorCode::InvalidArgument, "unmatched target column out of range");
    ++target_seen[t];
  }
  for (std::size_t s : unmatched_source_columns) {
    if (s >= p_s) raise(ErrorCode::InvalidArgument, "unmatched source column out of range");
    ++source_seen[s];
  }
  if (unmatched_fill.size() != unmatched_target_columns.size()) {
    raise(ErrorCode::InvalidArgument, "every unmatched target column needs a fill value");
  }
  for (int c : target_seen) {
    if (c != 1) raise(ErrorCode::InvalidArgument, "every target column must appear exactly once");
  }
  for (int c : source_seen) {
    if (c > 1) raise(ErrorCode::InvalidArgument, "a source column is used twice");
  }
}

Matrix apply_mapping(const FeatureMapping& mapping, const Matrix& source_features) {
  if (source_features.cols() != mapping.source_columns.size()) {
    raise(ErrorCode::DimensionMismatch, "mapping expects " + std::to_string(mapping.source_columns.size()) +
                                            " source columns, got " + std::to_string(source_features.cols()));
  }
  Matrix out(source_features.rows(), mapping.target_columns.size());
  for (const auto& pair : mapping.assignment) {
    for (std::size_t i = 0; i < out.rows(); ++i) {
      out(i, pair.target_column) = pair.transform.apply(source_features(i, pair.source_column));
    }
  }
  for (std::size_t k = 0; k < mapping.unmatched_target_columns.size(); ++k) {
    for (std::size_t i = 0; i < out.rows(); ++i) {
      out(i, mapping.unmatched_target_columns[k]) = mapping.unmatched_fill[k];
    }
  }
  return out;
}

Matrix apply_affine_mapping(const FeatureMapping& mapping, const Matrix& source_features) {
  FeatureMapping affine_only = mapping;
  for (auto& pair : affine_only.assignment) pair.transform.quantile.reset();
  return apply_mapping(affine_only, source_features);
}

Matrix feature_affinity(const TableView& source, const TableView& target, const MappingHints& hints,
                        const MappingSearchOptions& options) {
  const std::size_t p_s = source.table.cols();
  const std::size_t p_t = target.table.cols();
  std::vector<EmbeddingVector> s_names, t_names;
  for (std::size_t j = 0; j < p_s; ++j) s_names.push_back(embed_text(source.table.column_names[j], options.name_dimension));
  for (std::size_t j = 0; j < p_t; ++j) t_names.push_back(embed_text(target.table.column_names[j], options.name_dimension));

  std::vector<Profile> s_prof, t_prof;
  for (std::size_t j = 0; j < p_s; ++j) s_prof.push_back(profile_of(source, j));
  for (std::size_t j = 0; j < p_t; ++j) t_prof.push_back(profile_of(target, j));

  // each profile component is scaled by its range over all columns of both tables
  const auto component_range = [&](auto get) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : s_prof) lo = std::min(lo, get(p)), hi = std::max(hi, get(p));
    for (const auto& p : t_prof) lo = std::min(lo, get(p)), hi = std::max(hi, get(p));
    return hi - lo;
  };
  const auto get_mean = [](const Profile& p) { return p.mean; };
  const auto get_std = [](const Profile& p) { return p.std; };
  const auto get_skew = [](const Profile& p) { return p.skew; };
  const auto get_ratio = [](const Profile& p) { return p.distinct_ratio; };
  const double ranges[4] = {component_range(get_mean), component_range(get_std), component_range(get_skew),
                            component_range(get_ratio)};

  std::set<std::pair<std::string, std::string>> hinted;
  for (const auto& h : hints.pairs) hinted.emplace(h.source, h.target);

  Matrix affinity(p_s, p_t);
  for (std::size_t s = 0; s < p_s; ++s) {
    for (std::size_t t = 0; t < p_t; ++t) {
      if (is_categorical(source.table, s) != is_categorical(target.table, t)) {
        affinity(s, t) = kIncompatiblePenalty;
        continue;
      }
      const double diffs[4] = {s_prof[s].mean - t_prof[t].mean, s_prof[s].std - t_prof[t].std,
                               s_prof[s].skew - t_prof[t].skew,
                               s_prof[s].distinct_ratio - t_prof[t].distinct_ratio};
      double sq = 0.0;
      for (int c = 0; c < 4; ++c) {
        const double d = ranges[c] > 0.0 ? diffs[c] / ranges[c] : 0.0;
        sq += d * d;
      }
      const double profile_similarity = -std::sqrt(sq / 4.0);
      const double name_similarity = cosine_similarity(s_names[s], t_names[t]);
      const bool is_hinted =
          hinted.count({source.table.column_names[s], target.table.column_names[t]}) > 0;
      affinity(s, t) = options.name_weight * name_similarity + options.profile_weight * profile_similarity +
                       (is_hinted ? options.hint_weight * options.hint_bonus : 0.0);
    }
  }
  return affinity;
}

FeatureMapping mapping_for_assignment(const TableView& source, const TableView& target,
                                      const std::vector<int>& target_to_source) {
  const std::size_t p_s = source.table.cols();
  const std::size_t p_t = target.table.cols();
  if (target_to_source.size() != p_t) raise(ErrorCode::InvalidArgument, "assignment length must equal target width");
  FeatureMapping m;
  m.source_card = source.card.id;
  m.target_card = target.card.id;
  m.source_columns = source.table.column_names;
  m.target_columns = target.table.column_names;
  std::vector<char> used(p_s, 0);
  for (std::size_t t = 0; t < p_t; ++t) {
    const int s = target_to_source[t];
    if (s < 0) {
      m.unmatched_target_columns.push_back(t);
      m.unmatched_fill.push_back(median_value(present_values(target.table, t)));
      continue;
    }
    const auto su = static_cast<std::size_t>(s);
    if (su >= p_s || used[su]) raise(ErrorCode::InvalidArgument, "assignment is not injective");
    used[su] = 1;
    FeaturePair pair;
    pair.source_column = su;
    pair.target_column = t;
    if (is_categorical(source.table, su) && is_categorical(target.table, t)) {
      pair.transform.category_codes = category_code_map(source.table, su, target.table, t);
    } else {
      pair.transform.affine = standardizing_affine(source.table.features.column(su), target.table.features.column(t));
    }
    m.assignment.push_back(std::move(pair));
  }
  for (std::size_t s = 0; s < p_s; ++s) {
    if (!used[s]) m.unmatched_source_columns.push_back(s);
  }
  return m;
}

FeatureMapping search_feature_mapping(const TableView& source, const TableView& target,
                                      const MappingHints& hints, const KernelConfig& config,
                                      const MappingSearchOptions& options) {
  const std::size_t p_s = source.table.cols();
  const std::size_t p_t = target.table.cols();
  if (source.table.rows() == 0 || target.table.rows() == 0 || p_s == 0 || p_t == 0) {
    raise(ErrorCode::EmptyTable, "mapping search needs nonempty tables");
  }
  const Matrix affinity = feature_affinity(source, target, hints, options);

  // optimal linear assignment, then drop pairs under the affinity floor
  const std::vector<int> source_to_target = solve_assignment(affinity);
  std::vector<int> solution(p_t, -1);
  for (std::size_t s = 0; s < p_s; ++s) {
    const int t = source_to_target[s];
    if (t >= 0 && affinity(s, static_cast<std::size_t>(t)) >= options.affinity_floor) {
      solution[static_cast<std::size_t>(t)] = static_cast<int>(s);
    }
  }
  if (std::all_of(solution.begin(), solution.end(), [](int s) { return s < 0; })) {
    raise(ErrorCode::NoFeasibleMapping, "no source/target column pair from '" + source.card.id + "' to '" +
                                            target.card.id + "' clears the affinity floor");
  }

  // single-swap neighbourhood, best affinity first
  struct Candidate {
    std::vector<int> target_to_source;
    double affinity;
  };
  std::vector<Candidate> neighbours;
  {
    std::vector<char> used(p_s, 0);
    for (int s : solution) {
      if (s >= 0) used[static_cast<std::size_t>(s)] = 1;
    }
    for (std::size_t t1 = 0; t1 < p_t; ++t1) {
      if (solution[t1] < 0) continue;
      for (std::size_t t2 = t1 + 1; t2 < p_t; ++t2) {
        if (solution[t2] < 0) continue;
        auto v = solution;
        std::swap(v[t1], v[t2]);
        if (above_floor(affinity, v, options.affinity_floor)) neighbours.push_back({v, assignment_affinity(affinity, v)});
      }
      for (std::size_t s = 0; s < p_s; ++s) {
        if (used[s]) continue;
        auto v = solution;
        v[t1] = static_cast<int>(s);
        if (above_floor(affinity, v, options.affinity_floor)) neighbours.push_back({v, assignment_affinity(affinity, v)});
      }
    }
    const double solution_affinity = assignment_affinity(affinity, solution);
    std::erase_if(neighbours, [&](const Candidate& c) {
      return solution_affinity - c.affinity > options.perturbation_margin;
    });
    std::stable_sort(neighbours.begin(), neighbours.end(),
                     [](const Candidate& a, const Candidate& b) { return a.affinity > b.affinity; });
    if (neighbours.size() > options.max_perturbations) neighbours.resize(options.max_perturbations);
  }

  std::vector<std::vector<int>> candidates;
  std::set<std::vector<int>> seen;
  const auto add_candidate = [&](const std::vector<int>& c) -> std::size_t {
    if (seen.insert(c).second) {
      candidates.push_back(c);
      return candidates.size() - 1;
    }
    return static_cast<std::size_t>(std::find(candidates.begin(), candidates.end(), c) - candidates.begin());
  };
  add_candidate(solution);
  for (const auto& n : neighbours) add_candidate(n.target_to_source);

  std::optional<std::size_t> baseline_index;
  {
    std::vector<int> identity(p_t, -1);
    bool compatible = true;
    for (std::size_t t = 0; t < std::min(p_s, p_t); ++t) {
      identity[t] = static_cast<int>(t);
      compatible = compatible && is_categorical(source.table, t) == is_categorical(target.table, t);
    }
    if (compatible) baseline_index = add_candidate(identity);
  }

  for (const auto& c : full_assignments(source.table, target.table, options.exhaustive_limit)) add_candidate(c);

  // The source pool is drawn once from the raw rows so every candidate is
  // scored on the same instances.
  const std::uint64_t eq_seed = derive_seed(options.seed, 21);
  const Matrix& target_x = target.table.features;
  const std::size_t m = std::min({source.table.rows(), target_x.rows(), options.sample_cap});
  const Matrix source_pool = source.table.features.select_rows(
      subsample_rows(source.table.rows(), matching_pool_size(m, source.table.rows()), derive_seed(eq_seed, 13)));

  // gamma is fixed once so every candidate is scored on the same kernel
  double gamma = config.gamma;
  {
    const FeatureMapping first = mapping_for_assignment(source, target, solution);
    const auto [ms, mt] = equalize_samples(apply_affine_mapping(first, source_pool), target_x,
                                           options.sample_cap, eq_seed);
    gamma = resolve_gamma(config, ms, &mt);
  }
  const KernelConfig fixed = KernelConfig::fixed(gamma);

  std::vector<double> distances(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const FeatureMapping mapping_c = mapping_for_assignment(source, target, candidates[c]);
    const auto [ms, mt] = equalize_samples(apply_affine_mapping(mapping_c, source_pool), target_x,
                                           options.sample_cap, eq_seed);
    distances[c] = kernel_distance(ms, mt, fixed);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c) {
    if (distances[c] < distances[best]) best = c;
  }

  FeatureMapping mapping = mapping_for_assignment(source, target, candidates[best]);
  mapping.kernel_distance = distances[best];
  if (baseline_index) mapping.baseline_kernel_distance = distances[*baseline_index];
  mapping.gamma = gamma;
  mapping.candidates_evaluated = candidates.size();
  for (auto& pair : mapping.assignment) {
    pair.affinity = affinity(pair.source_column, pair.target_column);
    if (!options.fit_quantiles || pair.transform.category_codes) continue;
    const auto raw = source.table.features.column(pair.source_column);
    const auto tgt = target.table.features.column(pair.target_column);
    std::vector<double> affine_vals(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) affine_vals[i] = pair.transform.affine.apply(raw[i]);
    QuantileMap q = quantile_transform(affine_vals, tgt);
    std::vector<double> mapped(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) mapped[i] = q.apply(affine_vals[i]);
    const double w_quantile = wasserstein_1d(mapped, tgt);
    const double w_affine = wasserstein_1d(affine_vals, tgt);
    const double w_raw = wasserstein_1d(raw, tgt);
    if (w_quantile < w_affine && w_quantile <= w_raw) pair.transform.quantile = std::move(q);
  }
  return mapping;
}

ClassAlignment class_align(const TableView& source, const TableView& target, const MappingHints& hints) {
  const auto& s_labels = source.card.class_labels;
  const auto& t_labels = target.card.class_labels;
  const std::size_t ns = s_labels.size();
  const std::size_t nt = t_labels.size();
  if (ns == 0 || nt == 0) raise(ErrorCode::InvalidArgument, "class alignment needs class labels on both cards");
  ClassAlignment out;
  out.source_to_target.assign(ns, -1);
  out.method.assign(ns, "");
  out.class_count_mismatch = ns != nt;
  std::vector<char> t_used(nt, 0);
  const auto index_of = [](const std::vector<std::string>& v, const std::string& x) -> int {
    const auto it = std::find(v.begin(), v.end(), x);
    return it == v.end() ? -1 : static_cast<int>(it - v.begin());
  };
  const auto assign = [&](std::size_t s, std::size_t t, const char* how) {
    out.source_to_target[s] = static_cast<int>(t);
    out.method[s] = how;
    t_used[t] = 1;
  };

  for (const auto& h : hints.class_pairs) {
    const int s = index_of(s_labels, h.source);
    const int t = index_of(t_labels, h.target);
    if (s < 0 || t < 0 || out.source_to_target[static_cast<std::size_t>(s)] >= 0 || t_used[static_cast<std::size_t>(t)]) continue;
    assign(static_cast<std::size_t>(s), static_cast<std::size_t>(t), "hint");
  }
  for (std::size_t s = 0; s < ns; ++s) {
    if (out.source_to_target[s] >= 0) continue;
    const int t = index_of(t_labels, s_labels[s]);
    if (t >= 0 && !t_used[static_cast<std::size_t>(t)]) assign(s, static_cast<std::size_t>(t), "exact");
  }

  constexpr std::size_t kLabelDimension = 4096;
  Matrix sim(ns, nt);
  {
    std::vector<EmbeddingVector> se, te;
    for (const auto& l : s_labels) se.push_back(embed_text(l, kLabelDimension));
    for (const auto& l : t_labels) te.push_back(embed_text(l, kLabelDimension));
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t t = 0; t < nt; ++t) sim(s, t) = cosine_similarity(se[s], te[t]);
    }
  }
  for (;;) {
    double best = 0.0;
    std::size_t bs = ns, bt = nt;
    for (std::size_t s = 0; s < ns; ++s) {
      if (out.source_to_target[s] >= 0) continue;
      for (std::size_t t = 0; t < nt; ++t) {
        if (t_used[t]) continue;
        if (sim(s, t) > best) {
          best = sim(s, t);
          bs = s;
          bt = t;
        }
      }
    }
    if (bs == ns) break;
    assign(bs, bt, "embedding");
  }

  const auto prevalence_order = [](const LabeledTable& table, std::size_t classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (int y : table.labels) {
      if (static_cast<std::size_t>(y) < classes) ++counts[static_cast<std::size_t>(y)];
    }
    std::vector<std::size_t> order(classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    return order;
  };
  const auto s_order = prevalence_order(source.table, ns);
  const auto t_order = prevalence_order(target.table, nt);
  std::size_t cursor = 0;
  for (std::size_t s : s_order) {
    if (out.source_to_target[s] >= 0) continue;
    while (cursor < nt && t_used[t_order[cursor]]) ++cursor;
    if (cursor == nt) break;
    assign(s, t_order[cursor], "prevalence");
  }

  // surplus source classes attach to their most similar target class
  for (std::size_t s = 0; s < ns; ++s) {
    if (out.source_to_target[s] >= 0) continue;
    std::size_t best_t = t_order.front();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < nt; ++t) {
      if (sim(s, t) > best) {
        best = sim(s, t);
        best_t = t;
      }
    }
    if (best <= 0.0) best_t = t_order.front();
    out.source_to_target[s] = static_cast<int>(best_t);
    out.method[s] = "nearest";
  }
  return out;
}

std::pair<LabeledTable, HarmonizationReport> harmonize_dataset(const TableView& source,
                                                               const TableView& target,
                                                               const FeatureMapping& mapping,
                                                               const ClassAlignment& classes,
                                                               const HarmonizeOptions& options) {
  mapping.validate();
  if (mapping.source_columns.size() != source.table.cols() || mapping.target_columns.size() != target.table.cols()) {
    raise(ErrorCode::DimensionMismatch, "mapping does not fit the given source/target tables");
  }
  if (classes.source_to_target.size() != source.table.class_count) {
    raise(ErrorCode::LabelSpaceMismatch, "class map does not cover the source classes");
  }
  for (int t : classes.source_to_target) {
    if (t < 0 || static_cast<std::size_t>(t) >= target.table.class_count) {
      raise(ErrorCode::LabelSpaceMismatch, "class map points outside the target classes");
    }
  }

  const std::size_t n = source.table.rows();
  const std::size_t p_t = target.table.cols();
  LabeledTable out;
  out.features = apply_mapping(mapping, source.table.features);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = classes.source_to_target[static_cast<std::size_t>(source.table.labels[i])];
  }
  out.class_count = target.table.class_count;
  out.column_names = target.table.column_names;
  out.column_kinds = target.table.column_kinds;
  out.categories = target.table.categories;
  out.missing.assign(n * p_t, 0);
  for (const auto& pair : mapping.assignment) {
    for (std::size_t i = 0; i < n; ++i) {
      out.missing[i * p_t + pair.target_column] = source.table.is_missing(i, pair.source_column) ? 1 : 0;
    }
  }
  for (std::size_t t : mapping.unmatched_target_columns) {
    for (std::size_t i = 0; i < n; ++i) out.missing[i * p_t + t] = 1;
  }
  out.card_ref = source.table.card_ref;
  out.dropped_rows = source.table.dropped_rows;

  HarmonizationReport report;
  report.source_card = mapping.source_card;
  report.target_card = mapping.target_card;
  report.mapping = mapping;
  report.class_alignment = classes;
  report.gamma = mapping.gamma;

  // "before": assigned source columns as they arrived, fills elsewhere
  Matrix raw(n, p_t);
  for (std::size_t k = 0; k < mapping.unmatched_target_columns.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) raw(i, mapping.unmatched_target_columns[k]) = mapping.unmatched_fill[k];
  }
  for (const auto& pair : mapping.assignment) {
    for (std::size_t i = 0; i < n; ++i) raw(i, pair.target_column) = source.table.features(i, pair.source_column);
  }

  const KernelConfig fixed = KernelConfig::fixed(mapping.gamma > 0.0 ? mapping.gamma : 1.0);
  const std::uint64_t eq_seed = derive_seed(options.seed, 21);
  {
    const auto [bs, bt] = equalize_samples(raw, target.table.features, options.sample_cap, eq_seed);
    report.kernel_distance_before = kernel_distance(bs, bt, fixed);
    const auto [as, at] = equalize_samples(out.features, target.table.features, options.sample_cap, eq_seed);
    report.kernel_distance_after = kernel_distance(as, at, fixed);
  }

  for (std::size_t t = 0; t < p_t; ++t) {
    const auto tgt = target.table.features.column(t);
    report.per_feature_w1_before.push_back(wasserstein_1d(raw.column(t), tgt));
    report.per_feature_w1_after.push_back(wasserstein_1d(out.features.column(t), tgt));
  }

  std::vector<double> mean(p_t), sd(p_t);
  for (std::size_t t = 0; t < p_t; ++t) {
    const NumericSummary s = summarize(target.table.features.column(t));
    mean[t] = s.mean;
    sd[t] = s.std > 0.0 ? s.std : 1.0;
  }
  PooledWassersteinOptions wopts = options.wasserstein;
  wopts.row_cap = options.sample_cap;
  wopts.seed = derive_seed(options.seed, 31);
  const TransportPlan plan = pooled_wasserstein_plan(standardize_by(out.features, mean, sd),
                                                     standardize_by(target.table.features, mean, sd), wopts);
  report.pooled_wasserstein = plan.cost;
  report.sinkhorn_iterations = plan.iterations_used;
  return {std::move(out), std::move(report)};
}

std::string serialize_mapping(const FeatureMapping& m, const ClassAlignment& classes) {
  std::ostringstream os;
  os << "# feature mapping: target column <- transform(source column)\n";
  os << "source_card = " << m.source_card << "\n";
  os << "target_card = " << m.target_card << "\n";
  os << "source_columns = " << join_strings(m.source_columns) << "\n";
  os << "target_columns = " << join_strings(m.target_columns) << "\n";
  os << "gamma = " << format_double(m.gamma) << "\n";
  os << "kernel_distance = " << format_double(m.kernel_distance) << "\n";
  if (m.baseline_kernel_distance) {
    os << "baseline_kernel_distance = " << format_double(*m.baseline_kernel_distance) << "\n";
  }
  os << "candidates_evaluated = " << m.candidates_evaluated << "\n";
  for (const auto& pair : m.assignment) {
    const std::string key = "pair." + std::to_string(pair.target_column);
    os << "\n# " << m.target_columns[pair.target_column] << " <- " << m.source_columns[pair.source_column] << "\n";
    os << key << ".source = " << pair.source_column << "\n";
    os << key << ".affinity = " << format_double(pair.affinity) << "\n";
    if (pair.transform.category_codes) {
      os << key << ".category = " << join_doubles(*pair.transform.category_codes) << "\n";
    } else {
      os << key << ".affine = " << format_double(pair.transform.affine.scale) << ", "
         << format_double(pair.transform.affine.shift) << "\n";
      if (pair.transform.quantile) {
        os << key << ".quantile.source = " << join_doubles(pair.transform.quantile->source_knots) << "\n";
        os << key << ".quantile.target = " << join_doubles(pair.transform.quantile->target_knots) << "\n";
      }
    }
  }
  if (!m.unmatched_target_columns.empty()) os << "\n";
  for (std::size_t k = 0; k < m.unmatched_target_columns.size(); ++k) {
    os << "fill." << m.unmatched_target_columns[k] << " = " << format_double(m.unmatched_fill[k]) << "\n";
  }
  os << "\nunmatched_source = " << join_indices(m.unmatched_source_columns) << "\n";
  os << "\n# class map: source class index -> target class index\n";
  os << "class_count_mismatch = " << (classes.class_count_mismatch ? "true" : "false") << "\n";
  for (std::size_t s = 0; s < classes.source_to_target.size(); ++s) {
    os << "class." << s << " = " << classes.source_to_target[s] << "\n";
    os << "class." << s << ".method = " << classes.method[s] << "\n";
  }
  return os.str();
}

std::pair<FeatureMapping, ClassAlignment> parse_mapping(std::string_view text, const std::string& origin) {
  const KeyValueFile kv = KeyValueFile::parse(text, origin);
  FeatureMapping m;
  m.source_card = kv.get("source_card");
  m.target_card = kv.get("target_card");
  m.source_columns = split_list(kv.get("source_columns"));
  m.target_columns = split_list(kv.get("target_columns"));
  m.gamma = kv.get_double("gamma", 1.0);
  m.kernel_distance = kv.get_double("kernel_distance", 0.0);
  if (kv.has("baseline_kernel_distance")) m.baseline_kernel_distance = kv.get_double("baseline_kernel_distance", 0.0);
  m.candidates_evaluated = static_cast<std::size_t>(kv.get_int("candidates_evaluated", 0));

  for (std::size_t t = 0; t < m.target_columns.size(); ++t) {
    const std::string key = "pair." + std::to_string(t);
    const std::string fill_key = "fill." + std::to_string(t);
    if (kv.has(key + ".source")) {
      FeaturePair pair;
      pair.target_column = t;
      const long long s = parse_int(kv.get(key + ".source"), key + ".source");
      if (s < 0) raise(ErrorCode::InvalidConfig, origin + ": negative source index");
      pair.source_column = static_cast<std::size_t>(s);
      pair.affinity = kv.get_double(key + ".affinity", 0.0);
      if (kv.has(key + ".category")) {
        pair.transform.category_codes = parse_doubles(kv.get(key + ".category"), key + ".category");
      } else {
        const auto affine = parse_doubles(kv.get(key + ".affine"), key + ".affine");
        if (affine.size() != 2) raise(ErrorCode::InvalidConfig, origin + ": " + key + ".affine needs scale, shift");
        pair.transform.affine = {affine[0], affine[1]};
        if (kv.has(key + ".quantile.source")) {
          QuantileMap q;
          q.source_knots = parse_doubles(kv.get(key + ".quantile.source"), key);
          q.target_knots = parse_doubles(kv.get(key + ".quantile.target"), key);
          pair.transform.quantile = std::move(q);
        }
      }
      m.assignment.push_back(std::move(pair));
    } else if (kv.has(fill_key)) {
      m.unmatched_target_columns.push_back(t);
      m.unmatched_fill.push_back(kv.get_double(fill_key, 0.0));
    } else {
      raise(ErrorCode::InvalidConfig, origin + ": target column " + std::to_string(t) + " is neither paired nor filled");
    }
  }
  m.unmatched_source_columns = parse_indices(kv.get_or("unmatched_source", ""), "unmatched_source");
  try {
    m.validate();
  } catch (const Error& e) {
    raise(ErrorCode::InvalidConfig, origin + ": " + e.what());
  }

  ClassAlignment classes;
  classes.class_count_mismatch = kv.get_or("class_count_mismatch", "false") == "true";
  for (std::size_t s = 0;; ++s) {
    const std::string key = "class." + std::to_string(s);
    if (!kv.has(key)) break;
    classes.source_to_target.push_back(static_cast<int>(parse_int(kv.get(key), key)));
    classes.method.push_back(kv.get_or(key + ".method", "manual"));
  }
  if (classes.source_to_target.empty()) raise(ErrorCode::InvalidConfig, origin + ": no class map entries");
  return {std::move(m), std::move(classes)};
}

std::string serialize_report(const HarmonizationReport& r) {
  std::ostringstream os;
  os << "source_card = " << r.source_card << "\n";
  os << "target_card = " << r.target_card << "\n";
  os << "gamma = " << format_double(r.gamma) << "\n";
  os << "kernel_distance_before = " << format_double(r.kernel_distance_before) << "\n";
  os << "kernel_distance_after = " << format_double(r.kernel_distance_after) << "\n";
  os << "pooled_wasserstein = " << format_double(r.pooled_wasserstein) << "\n";
  os << "sinkhorn_iterations = " << r.sinkhorn_iterations << "\n";
  os << "class_count_mismatch = " << (r.class_alignment.class_count_mismatch ? "true" : "false") << "\n";
  os << "# per-feature: target column | source column | transform | W1 before | W1 after\n";
  const auto& m = r.mapping;
  for (std::size_t t = 0; t < m.target_columns.size(); ++t) {
    std::string source = "(fill)";
    std::string transform = "constant";
    for (const auto& pair : m.assignment) {
      if (pair.target_column != t) continue;
      source = m.source_columns[pair.source_column];
      transform = pair.transform.category_codes ? "category"
                  : pair.transform.quantile      ? "affine+quantile"
                                                 : "affine";
    }
    os << "feature." << t << " = " << m.target_columns[t] << " | " << source << " | " << transform << " | "
       << format_double(r.per_feature_w1_before[t]) << " | " << format_double(r.per_feature_w1_after[t]) << "\n";
  }
  for (std::size_t s = 0; s < r.class_alignment.source_to_target.size(); ++s) {
    os << "class." << s << " = " << r.class_alignment.source_to_target[s] << " (" << r.class_alignment.method[s]
       << ")\n";
  }
  return os.str();
}

}  // namespace tabxfer
