#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tabxfer/catalog.hpp"
#include "tabxfer/llm_adapter.hpp"
#include "tabxfer/matrix.hpp"
#include "tabxfer/optimal_transport.hpp"

namespace tabxfer {

enum class BandwidthMode { Fixed, MedianHeuristic };

// Gaussian kernel exp(-gamma * ||x - y||^2). Under the median heuristic
// gamma = 1 / (2 m^2) with m the median pairwise distance of the pooled
// sample (gamma = 1 when m = 0).
struct KernelConfig {
  double gamma = 1.0;
  BandwidthMode bandwidth_mode = BandwidthMode::MedianHeuristic;

  static KernelConfig fixed(double gamma) { return {gamma, BandwidthMode::Fixed}; }
};

double median_heuristic_gamma(const Matrix& pooled);
double resolve_gamma(const KernelConfig& config, const Matrix& a, const Matrix* b = nullptr);

Matrix gram_matrix(const Matrix& points, const KernelConfig& config);

// Frobenius norm of the difference between the gram matrices of two
// equally sized samples.
double kernel_distance(const Matrix& source, const Matrix& target, const KernelConfig& config);

// Rows of the first sample considered for matching, bounded so the matching
// stays within a fixed work budget.
inline constexpr std::size_t kMatchingBudget = std::size_t{1} << 27;
std::size_t matching_pool_size(std::size_t m, std::size_t available);

// Brings two samples to a common size m = min(n_a, n_b, cap). Both sides are
// put in lexicographic row order first so the result does not depend on the
// input row order. The second sample is subsampled to m rows; a seeded pool
// of the first is then paired with it by a min-cost matching on squared
// Euclidean distance, so row i of one output faces its matched row i of
// the other.

std::pair<Matrix, Matrix> equalize_samples(const Matrix& a, const Matrix& b, std::size_t cap,
                                           std::uint64_t seed);

struct AffineTransform {
  double scale = 1.0;
  double shift = 0.0;
  double apply(double x) const { return scale * x + shift; }
  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

inline constexpr std::size_t kQuantileLevels = 101;

// Monotone piecewise-linear map between empirical quantiles, clamped
// outside the knot range.
struct QuantileMap {
  std::vector<double> source_knots;
  std::vector<double> target_knots;

  double apply(double x) const;
  bool monotone() const;
  friend bool operator==(const QuantileMap&, const QuantileMap&) = default;
};

// Type-7 empirical quantile of a sample at level q in [0, 1].
double empirical_quantile(std::span<const double> sorted, double q);

QuantileMap quantile_transform(std::span<const double> source, std::span<const double> target);

struct ColumnTransform {
  AffineTransform affine;
  std::optional<QuantileMap> quantile;
  // categorical pairs: target code per source code
  std::optional<std::vector<double>> category_codes;

  double apply(double x) const;
  friend bool operator==(const ColumnTransform&, const ColumnTransform&) = default;
};

struct FeaturePair {
  std::size_t source_column = 0;
  std::size_t target_column = 0;
  double affinity = 0.0;
  ColumnTransform transform;
  friend bool operator==(const FeaturePair&, const FeaturePair&) = default;
};

// f: X_k -> X_T as a partial injection of columns plus per-column
// transforms. Every target column is either assigned or filled.
struct FeatureMapping {
  std::string source_card;
  std::string target_card;
  std::vector<std::string> source_columns;
  std::vector<std::string> target_columns;
  std::vector<FeaturePair> assignment;  // ordered by target column
  std::vector<std::size_t> unmatched_target_columns;
  std::vector<double> unmatched_fill;  // target medians, parallel to the above
  std::vector<std::size_t> unmatched_source_columns;
  double kernel_distance = 0.0;           // selected candidate, post-affine
  std::optional<double> baseline_kernel_distance;  // identity-ordered candidate
  double gamma = 1.0;
  std::size_t candidates_evaluated = 0;

  void validate() const;
  friend bool operator==(const FeatureMapping&, const FeatureMapping&) = default;
};

// Source columns in target order with each column's transform applied;
// unmatched target columns carry their fill constant.
Matrix apply_mapping(const FeatureMapping& mapping, const Matrix& source_features);

// Affine-only variant used while scoring candidates.
Matrix apply_affine_mapping(const FeatureMapping& mapping, const Matrix& source_features);

struct TableView {
  const LabeledTable& table;
  const Schema& schema;
  const DatasetCard& card;
};

struct MappingSearchOptions {
  double name_weight = 0.5;     // w1
  double profile_weight = 0.3;  // w2
  double hint_weight = 0.2;     // w3
  double hint_bonus = 1.0;
  double affinity_floor = -0.4;
  std::size_t max_perturbations = 10;
  // A swap variant is scored only when it loses at most this much total
  // affinity against the assignment solution.
  double perturbation_margin = 0.3;
  // Every kind-compatible full assignment is also scored when there are at
  // most this many of them.
  std::size_t exhaustive_limit = 0;
  std::size_t sample_cap = 512;
  std::size_t name_dimension = 4096;
  bool fit_quantiles = true;
  std::uint64_t seed = 0;
};

// Pairwise feature affinity: w1 * name cosine + w2 * profile similarity +
// w3 * hint bonus. Kind-incompatible pairs get a large negative value.
Matrix feature_affinity(const TableView& source, const TableView& target, const MappingHints& hints,
                        const MappingSearchOptions& options);

FeatureMapping search_feature_mapping(const TableView& source, const TableView& target,
                                      const MappingHints& hints, const KernelConfig& config,
                                      const MappingSearchOptions& options = {});

// Builds a mapping for an explicit assignment (target column -> source
// column, -1 for unmatched) with standardizing affine transforms.
FeatureMapping mapping_for_assignment(const TableView& source, const TableView& target,
                                      const std::vector<int>& target_to_source);

struct ClassAlignment {
  std::vector<int> source_to_target;
  std::vector<std::string> method;  // hint | exact | embedding | prevalence | nearest
  bool class_count_mismatch = false;
  friend bool operator==(const ClassAlignment&, const ClassAlignment&) = default;
};

ClassAlignment class_align(const TableView& source, const TableView& target, const MappingHints& hints);

struct HarmonizationReport {
  std::string source_card;
  std::string target_card;
  double kernel_distance_before = 0.0;
  double kernel_distance_after = 0.0;
  std::vector<double> per_feature_w1_before;
  std::vector<double> per_feature_w1_after;
  double pooled_wasserstein = 0.0;
  int sinkhorn_iterations = 0;
  double gamma = 1.0;
  FeatureMapping mapping;
  ClassAlignment class_alignment;
};

struct HarmonizeOptions {
  std::size_t sample_cap = 512;
  PooledWassersteinOptions wasserstein;
  std::uint64_t seed = 0;
};

std::pair<LabeledTable, HarmonizationReport> harmonize_dataset(const TableView& source,
                                                               const TableView& target,
                                                               const FeatureMapping& mapping,
                                                               const ClassAlignment& classes,
                                                               const HarmonizeOptions& options = {});

std::string serialize_mapping(const FeatureMapping& mapping, const ClassAlignment& classes);
std::pair<FeatureMapping, ClassAlignment> parse_mapping(std::string_view text,
                                                        const std::string& origin = "<mapping>");
std::string serialize_report(const HarmonizationReport& report);

}  // namespace tabxfer
