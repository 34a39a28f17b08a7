#include "tabxfer/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "tabxfer/error.hpp"
#include "tabxfer/kv.hpp"
#include "tabxfer/random.hpp"
#include "tabxfer/text.hpp"

namespace tabxfer {
namespace {

struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC 4180 style: quoted fields may contain the delimiter, newlines and
// doubled quotes. Fully blank lines are skipped.
std::vector<CsvRow> parse_delimited(const std::string& text, char delim, const std::string& origin) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  row.line = 1;

  const auto end_field = [&] {
    row.fields.push_back(in_quotes ? field : trim(field));
    field.clear();
    field_started = false;
  };
  const auto end_row = [&] {
    end_field();
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{};
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && trim(field).empty() && !field_started) {
      field.clear();
      in_quotes = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\n') {
      end_row();
      ++line;
      row.line = line;
    } else if (c == '\r') {
      // tolerate CRLF
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) raise(ErrorCode::UnparseableCell, origin + ": unterminated quoted field");
  if (!field.empty() || !row.fields.empty()) end_row();
  return rows;
}

std::optional<double> parse_number(const std::string& cell) {
  std::string_view s = cell;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

char parse_delimiter(const std::string& value, const std::string& origin) {
  if (value.empty() || value == ",") return ',';
  if (value == "tab" || value == "\\t") return '\t';
  if (value.size() == 1) return value[0];
  raise(ErrorCode::InvalidCard, origin + ": unsupported delimiter '" + value + "'");
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string to_string(SchemaKind kind) {
  switch (kind) {
    case SchemaKind::Numeric: return "numeric";
    case SchemaKind::Categorical: return "categorical";
    case SchemaKind::TextLike: return "text-like";
  }
  return "unknown";
}

std::vector<std::size_t> LabeledTable::class_counts() const {
  std::vector<std::size_t> counts(class_count, 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

LabeledTable LabeledTable::select_rows(const std::vector<std::size_t>& rows) const {
  LabeledTable out;
  out.features = features.select_rows(rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels[r]);
  out.class_count = class_count;
  out.column_names = column_names;
  out.column_kinds = column_kinds;
  out.categories = categories;
  if (!missing.empty()) {
    out.missing.reserve(rows.size() * cols());
    for (std::size_t r : rows) {
      out.missing.insert(out.missing.end(), missing.begin() + static_cast<std::ptrdiff_t>(r * cols()),
                         missing.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols()));
    }
  }
  out.card_ref = card_ref;
  out.dropped_rows = dropped_rows;
  return out;
}

DatasetCard load_card(const std::filesystem::path& card_path) {
  const KeyValueFile kv = KeyValueFile::load(card_path);
  const std::string origin = card_path.string();
  DatasetCard card;
  card.source_path = card_path;
  card.id = kv.get_or("id", "");
  if (card.id.empty()) raise(ErrorCode::InvalidCard, origin + ": missing 'id'");
  card.name = kv.get_or("name", card.id);
  card.description = kv.get_or("description", "");
  card.target_column = kv.get_or("target", "");
  if (card.target_column.empty()) raise(ErrorCode::InvalidCard, origin + ": missing 'target'");
  card.class_labels = split_list(kv.get_or("classes", ""));
  card.feature_names = split_list(kv.get_or("features", ""));
  card.delimiter = parse_delimiter(kv.get_or("delimiter", ","), origin);

  if (card.feature_names.empty()) raise(ErrorCode::InvalidCard, origin + ": 'features' is empty");
  if (card.class_labels.size() < 2) {
    raise(ErrorCode::InvalidCard, origin + ": 'classes' needs at least two labels");
  }
  if (std::find(card.feature_names.begin(), card.feature_names.end(), card.target_column) !=
      card.feature_names.end()) {
    raise(ErrorCode::InvalidCard, origin + ": target '" + card.target_column + "' listed as a feature");
  }
  {
    std::set<std::string> seen(card.feature_names.begin(), card.feature_names.end());
    if (seen.size() != card.feature_names.size()) {
      raise(ErrorCode::InvalidCard, origin + ": duplicate feature names");
    }
    std::set<std::string> labels(card.class_labels.begin(), card.class_labels.end());
    if (labels.size() != card.class_labels.size()) {
      raise(ErrorCode::InvalidCard, origin + ": duplicate class labels");
    }
  }

  card.feature_descriptions.assign(card.feature_names.size(), "");
  for (const auto& e : kv.with_prefix("feature_desc.")) {
    const std::string feature = e.key.substr(std::string("feature_desc.").size());
    const auto it = std::find(card.feature_names.begin(), card.feature_names.end(), feature);
    if (it == card.feature_names.end()) {
      raise(ErrorCode::InvalidCard, origin + ": feature_desc for unknown feature '" + feature + "'");
    }
    card.feature_descriptions[static_cast<std::size_t>(it - card.feature_names.begin())] = e.value;
  }

  const std::string data = kv.get_or("data_path", "");
  if (data.empty()) raise(ErrorCode::InvalidCard, origin + ": missing 'data_path'");
  std::filesystem::path data_path(data);
  if (data_path.is_relative()) data_path = card_path.parent_path() / data_path;
  card.data_path = data_path.lexically_normal();
  return card;
}

std::string serialize_card(const DatasetCard& card) {
  const auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
    return out;
  };
  std::ostringstream os;
  os << "id = " << card.id << "\n";
  os << "name = " << card.name << "\n";
  os << "description = " << card.description << "\n";
  os << "target = " << card.target_column << "\n";
  os << "classes = " << join(card.class_labels) << "\n";
  os << "features = " << join(card.feature_names) << "\n";
  for (std::size_t i = 0; i < card.feature_names.size(); ++i) {
    if (i < card.feature_descriptions.size() && !card.feature_descriptions[i].empty()) {
      os << "feature_desc." << card.feature_names[i] << " = " << card.feature_descriptions[i] << "\n";
    }
  }
  if (card.delimiter != ',') {
    os << "delimiter = " << (card.delimiter == '\t' ? std::string("tab") : std::string(1, card.delimiter))
       << "\n";
  }
  std::filesystem::path data = card.data_path;
  if (!card.source_path.empty() && data.is_absolute()) {
    data = data.lexically_relative(card.source_path.parent_path());
  }
  os << "data_path = " << data.generic_string() << "\n";
  return os.str();
}

LabeledTable load_table(const DatasetCard& card) {
  const std::string origin = card.data_path.string();
  const auto rows = parse_delimited(read_file(card.data_path), card.delimiter, origin);
  if (rows.empty()) raise(ErrorCode::EmptyTable, origin + ": no header row");

  const auto& header = rows[0].fields;
  const auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto target_col = column_of(card.target_column);
  if (!target_col) {
    raise(ErrorCode::MissingTargetColumn, origin + ": target column '" + card.target_column + "' not in header");
  }
  std::vector<std::size_t> feature_cols;
  for (const auto& f : card.feature_names) {
    const auto c = column_of(f);
    if (!c) raise(ErrorCode::MissingColumn, origin + ": feature column '" + f + "' not in header");
    feature_cols.push_back(*c);
  }
  if (rows.size() == 1) raise(ErrorCode::EmptyTable, origin + ": header only, no data rows");

  const std::size_t p = feature_cols.size();
  std::vector<const CsvRow*> kept;
  std::vector<int> labels;
  std::size_t dropped = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.fields.size() != header.size()) {
      raise(ErrorCode::UnparseableCell, origin + ": row " + std::to_string(row.line) + ": expected " +
                                            std::to_string(header.size()) + " fields, found " +
                                            std::to_string(row.fields.size()));
    }
    const std::string& raw_label = row.fields[*target_col];
    if (raw_label.empty()) {
      ++dropped;
      continue;
    }
    int label = -1;
    for (std::size_t k = 0; k < card.class_labels.size(); ++k) {
      if (card.class_labels[k] == raw_label) {
        label = static_cast<int>(k);
        break;
      }
    }
    if (label < 0) {
      if (const auto v = parse_number(raw_label)) {
        for (std::size_t k = 0; k < card.class_labels.size(); ++k) {
          const auto c = parse_number(card.class_labels[k]);
          if (c && *c == *v) {
            label = static_cast<int>(k);
            break;
          }
        }
      }
    }
    if (label < 0) {
      raise(ErrorCode::UnparseableCell, origin + ": row " + std::to_string(row.line) + " column '" +
                                            card.target_column + "': label '" + raw_label +
                                            "' is not one of the card's classes");
    }
    kept.push_back(&row);
    labels.push_back(label);
  }
  if (kept.empty()) raise(ErrorCode::EmptyTable, origin + ": every row is missing its label");

  const std::size_t n = kept.size();
  LabeledTable table;
  table.features = Matrix(n, p);
  table.labels = std::move(labels);
  table.class_count = card.class_labels.size();
  table.column_names = card.feature_names;
  table.column_kinds.resize(p);
  table.categories.resize(p);
  table.missing.assign(n * p, 0);
  table.card_ref = card.id;
  table.dropped_rows = dropped;

  for (std::size_t j = 0; j < p; ++j) {
    const std::size_t col = feature_cols[j];
    bool numeric = true;
    for (const CsvRow* row : kept) {
      const std::string& cell = row->fields[col];
      if (!cell.empty() && !parse_number(cell)) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      table.column_kinds[j] = ColumnKind::Continuous;
      std::vector<double> present;
      for (std::size_t i = 0; i < n; ++i) {
        const std::string& cell = kept[i]->fields[col];
        if (cell.empty()) {
          table.missing[i * p + j] = 1;
          continue;
        }
        const double v = *parse_number(cell);
        if (!std::isfinite(v)) {
          raise(ErrorCode::UnparseableCell, origin + ": row " + std::to_string(kept[i]->line) +
                                                " column '" + card.feature_names[j] +
                                                "': non-finite value '" + cell + "'");
        }
        table.features(i, j) = v;
        present.push_back(v);
      }
      const double median = median_of(present);
      for (std::size_t i = 0; i < n; ++i) {
        if (table.missing[i * p + j]) table.features(i, j) = median;
      }
    } else {
      table.column_kinds[j] = ColumnKind::CategoricalEncoded;
      std::unordered_map<std::string, int> codes;
      auto& dict = table.categories[j];
      bool any_missing = false;
      for (std::size_t i = 0; i < n; ++i) {
        const std::string& cell = kept[i]->fields[col];
        if (cell.empty()) {
          any_missing = true;
          table.missing[i * p + j] = 1;
          continue;
        }
        auto [it, inserted] = codes.try_emplace(cell, static_cast<int>(dict.size()));
        if (inserted) dict.push_back(cell);
        table.features(i, j) = it->second;
      }
      if (any_missing) {
        const double missing_code = static_cast<double>(dict.size());
        dict.push_back(kMissingCategory);
        for (std::size_t i = 0; i < n; ++i) {
          if (table.missing[i * p + j]) table.features(i, j) = missing_code;
        }
      }
    }
  }
  return table;
}

std::pair<DatasetCard, LabeledTable> load_dataset(const std::filesystem::path& card_path) {
  DatasetCard card = load_card(card_path);
  LabeledTable table = load_table(card);
  return {std::move(card), std::move(table)};
}

std::vector<DatasetCard> load_library(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    raise(ErrorCode::NotFound, "library directory " + dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".card") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<DatasetCard> cards;
  std::map<std::string, std::filesystem::path> seen;
  for (const auto& path : paths) {
    DatasetCard card = load_card(path);
    const auto [it, inserted] = seen.emplace(card.id, path);
    if (!inserted) {
      raise(ErrorCode::DuplicateCardId, "card id '" + card.id + "' appears in both " +
                                            it->second.string() + " and " + path.string());
    }
    cards.push_back(std::move(card));
  }
  std::sort(cards.begin(), cards.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return cards;
}

NumericSummary summarize(const std::vector<double>& values) {
  NumericSummary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  s.std = std::sqrt(m2);
  s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return s;
}

Schema infer_schema(const LabeledTable& table, const DatasetCard& card) {
  Schema schema;
  schema.row_count = table.rows();
  const std::size_t n = table.rows();
  for (std::size_t j = 0; j < table.cols(); ++j) {
    ColumnSchema col;
    col.name = j < card.feature_names.size() ? card.feature_names[j] : table.column_names[j];
    std::vector<double> present;
    present.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (table.is_missing(i, j)) {
        ++col.missing_count;
      } else {
        present.push_back(table.features(i, j));
      }
    }
    if (table.column_kinds[j] == ColumnKind::Continuous) {
      col.kind = SchemaKind::Numeric;
      std::vector<double> sorted = present;
      std::sort(sorted.begin(), sorted.end());
      col.distinct_count = static_cast<std::size_t>(
          std::unique(sorted.begin(), sorted.end()) - sorted.begin());
      if (!present.empty()) col.stats = summarize(present);
    } else {
      const auto& dict = table.categories[j];
      col.distinct_count = dict.size() - (col.missing_count > 0 ? 1 : 0);
      std::size_t tokens = 0;
      for (std::size_t k = 0; k < col.distinct_count; ++k) tokens += tokenize(dict[k]).size();
      const double mean_tokens =
          col.distinct_count ? static_cast<double>(tokens) / static_cast<double>(col.distinct_count) : 0.0;
      const bool mostly_unique =
          present.size() >= 10 && 2 * col.distinct_count > present.size();
      col.kind = (mostly_unique || mean_tokens >= 3.0) ? SchemaKind::TextLike : SchemaKind::Categorical;
    }
    schema.columns.push_back(std::move(col));
  }
  return schema;
}

HoldoutSplit split_holdout(const LabeledTable& table, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    raise(ErrorCode::InvalidArgument, "holdout fraction must lie in (0, 1)");
  }
  const std::size_t n = table.rows();
  if (n < 2) raise(ErrorCode::InfeasibleSplit, "need at least two rows to split");

  Rng rng(seed);
  HoldoutSplit split;
  std::vector<std::vector<std::size_t>> by_class(table.class_count);
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(table.labels[i])].push_back(i);
  const bool stratifiable =
      std::none_of(by_class.begin(), by_class.end(), [](const auto& rows) { return rows.size() == 1; });

  if (stratifiable) {
    for (auto& rows : by_class) {
      if (rows.empty()) continue;
      rng.shuffle(std::span<std::size_t>(rows));
      const std::size_t m = rows.size();
      auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(m)));
      take = std::clamp<std::size_t>(take, 1, m - 1);
      split.holdout_rows.insert(split.holdout_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
      split.train_rows.insert(split.train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
    }
  } else {
    split.stratification_fallback = true;
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    rng.shuffle(std::span<std::size_t>(rows));
    auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    take = std::clamp<std::size_t>(take, 1, n - 1);
    split.holdout_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
    split.train_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
  }
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.holdout_rows.begin(), split.holdout_rows.end());
  split.train = table.select_rows(split.train_rows);
  split.holdout = table.select_rows(split.holdout_rows);
  return split;
}

}  // namespace tabxfer
