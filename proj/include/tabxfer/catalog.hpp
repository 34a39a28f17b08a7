#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tabxfer/matrix.hpp"

namespace tabxfer {

// Textual identity of a dataset, read from a `key = value` card file.
struct DatasetCard {
  std::string id;
  std::string name;
  std::string description;
  std::vector<std::string> feature_names;
  std::vector<std::string> feature_descriptions;  // parallel to feature_names; "" when absent
  std::string target_column;
  std::vector<std::string> class_labels;
  std::filesystem::path source_path;  // the card file itself
  std::filesystem::path data_path;    // resolved against the card's directory
  char delimiter = ',';
};

enum class ColumnKind { Continuous, CategoricalEncoded };

// Fully numeric view of a dataset: features X (n x p) plus class indices y.
struct LabeledTable {
  Matrix features;
  std::vector<int> labels;
  std::size_t class_count = 0;
  std::vector<std::string> column_names;
  std::vector<ColumnKind> column_kinds;
  // Category dictionary per column in code order; empty for continuous columns.
  std::vector<std::vector<std::string>> categories;
  // n x p mask, 1 where the cell was missing and imputed.
  std::vector<std::uint8_t> missing;
  std::string card_ref;
  std::size_t dropped_rows = 0;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t cols() const noexcept { return features.cols(); }
  bool is_missing(std::size_t r, std::size_t c) const {
    return !missing.empty() && missing[r * cols() + c] != 0;
  }
  std::vector<std::size_t> class_counts() const;
  LabeledTable select_rows(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const LabeledTable&, const LabeledTable&) = default;
};

inline constexpr const char* kMissingCategory = "<missing>";

enum class SchemaKind { Numeric, Categorical, TextLike };

struct NumericSummary {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population convention
  double skewness = 0.0;
};

struct ColumnSchema {
  std::string name;
  SchemaKind kind = SchemaKind::Numeric;
  std::size_t distinct_count = 0;
  std::size_t missing_count = 0;
  std::optional<NumericSummary> stats;  // numeric columns only
};

struct Schema {
  std::size_t row_count = 0;
  std::vector<ColumnSchema> columns;
};

std::string to_string(SchemaKind kind);

DatasetCard load_card(const std::filesystem::path& card_path);
std::string serialize_card(const DatasetCard& card);

// Reads the card's data file and encodes it.
LabeledTable load_table(const DatasetCard& card);
std::pair<DatasetCard, LabeledTable> load_dataset(const std::filesystem::path& card_path);

// Every `*.card` file directly under `dir`, ordered by id.
std::vector<DatasetCard> load_library(const std::filesystem::path& dir);

Schema infer_schema(const LabeledTable& table, const DatasetCard& card);

struct HoldoutSplit {
  LabeledTable train;
  LabeledTable holdout;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> holdout_rows;
  // Set when some class had a single member and the split fell back to an
  // unstratified draw.
  bool stratification_fallback = false;
};

HoldoutSplit split_holdout(const LabeledTable& table, double fraction, std::uint64_t seed);

// Summary statistics over a sample (population std, Fisher-Pearson skew).
NumericSummary summarize(const std::vector<double>& values);

}  // namespace tabxfer
