#include "tabxfer/embed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "tabxfer/error.hpp"
#include "tabxfer/kernels.hpp"
#include "tabxfer/kv.hpp"
#include "tabxfer/llm_adapter.hpp"
#include "tabxfer/text.hpp"

namespace tabxfer {
namespace {

double euclidean_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string hexfloat(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

}  // namespace

EmbeddingVector EmbeddingVector::from_values(std::vector<double> values) {
  EmbeddingVector v;
  v.norm = euclidean_norm(values);
  v.values = std::move(values);
  return v;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    raise(ErrorCode::DimensionMismatch, "cosine of vectors with different dimensions");
  }
  if (a.norm == 0.0 || b.norm == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return std::clamp(dot / (a.norm * b.norm), -1.0, 1.0);
}

Vocabulary Vocabulary::build(const std::vector<std::string>& documents) {
  Vocabulary vocab;
  vocab.documents_ = documents.size();
  for (const auto& doc : documents) {
    const auto tokens = tokenize(doc);
    const std::set<std::string> unique(tokens.begin(), tokens.end());
    for (const auto& t : unique) ++vocab.df_[t];
  }
  return vocab;
}

double Vocabulary::idf(const std::string& token) const {
  const auto it = df_.find(token);
  const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(documents_)) / (1.0 + df)) + 1.0;
}

EmbeddingVector embed_text(std::string_view text, std::size_t dimension, const Vocabulary* vocabulary) {
  if (dimension < 64) raise(ErrorCode::InvalidArgument, "embedding dimension must be at least 64");
  std::map<std::string, std::size_t> tf;
  for (auto& t : tokenize(text)) ++tf[std::move(t)];
  std::vector<double> values(dimension, 0.0);
  for (const auto& [token, count] : tf) {
    double weight = 1.0 + std::log(static_cast<double>(count));
    if (vocabulary) weight *= vocabulary->idf(token);
    const std::uint64_t h = fnv1a64(token);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    values[h % dimension] += sign * weight;
  }
  return EmbeddingVector::from_values(std::move(values));
}

HashedTfEmbedder::HashedTfEmbedder(std::size_t dimension, std::optional<Vocabulary> vocabulary)
    : dimension_(dimension), vocabulary_(std::move(vocabulary)) {
  if (dimension_ < 64) raise(ErrorCode::InvalidArgument, "embedding dimension must be at least 64");
}

EmbeddingVector HashedTfEmbedder::embed(std::string_view text) const {
  return embed_text(text, dimension_, vocabulary_ ? &*vocabulary_ : nullptr);
}

std::string HashedTfEmbedder::tag() const { return vocabulary_ ? "hashed-tf-idf" : "hashed-tf"; }

std::string card_text(const DatasetCard& card) {
  std::vector<std::string_view> parts;
  parts.push_back(card.name);
  parts.push_back(card.description);
  for (const auto& f : card.feature_names) parts.push_back(f);
  for (const auto& d : card.feature_descriptions) parts.push_back(d);
  for (const auto& c : card.class_labels) parts.push_back(c);
  std::string out;
  for (auto part : parts) {
    if (part.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(part);
  }
  return out;
}

CardIndex::CardIndex(std::size_t dimension, std::string embedder_tag)
    : dimension_(dimension), tag_(std::move(embedder_tag)), vectors_(0, dimension) {
  if (dimension_ == 0) raise(ErrorCode::InvalidArgument, "index dimension must be positive");
}

CardIndex CardIndex::build(const std::vector<DatasetCard>& cards, const Embedder& embedder) {
  CardIndex index(embedder.dimension(), embedder.tag());
  if (const auto* hashed = dynamic_cast<const HashedTfEmbedder*>(&embedder)) {
    index.vocabulary_ = hashed->vocabulary();
  }
  for (const auto& card : cards) index.add(card.id, embedder.embed(card_text(card)));
  return index;
}

void CardIndex::add(const std::string& id, const EmbeddingVector& vector) {
  if (vector.dimension() != dimension_) {
    raise(ErrorCode::DimensionMismatch, "vector for '" + id + "' has dimension " +
                                            std::to_string(vector.dimension()) + ", index expects " +
                                            std::to_string(dimension_));
  }
  if (std::find(ids_.begin(), ids_.end(), id) != ids_.end()) {
    raise(ErrorCode::DuplicateCardId, "card id '" + id + "' already indexed");
  }
  Matrix grown(ids_.size() + 1, dimension_);
  std::copy(vectors_.data().begin(), vectors_.data().end(), grown.data().begin());
  std::copy(vector.values.begin(), vector.values.end(), grown.row(ids_.size()).begin());
  vectors_ = std::move(grown);
  ids_.push_back(id);
  norms_.push_back(vector.norm);
}

EmbeddingVector CardIndex::vector(std::size_t i) const {
  auto row = vectors_.row(i);
  EmbeddingVector v;
  v.values.assign(row.begin(), row.end());
  v.norm = norms_[i];
  return v;
}

RetrievalResult CardIndex::query_topk(const EmbeddingVector& query, std::size_t k) const {
  if (ids_.empty()) raise(ErrorCode::EmptyIndex, "query against an empty index");
  if (query.dimension() != dimension_) {
    raise(ErrorCode::DimensionMismatch, "query has dimension " + std::to_string(query.dimension()) +
                                            ", index expects " + std::to_string(dimension_));
  }
  if (k == 0) raise(ErrorCode::InvalidArgument, "k must be at least 1");
  const auto scores = kernels::cosine_scores(vectors_, norms_, query.values, query.norm);
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids_[a] < ids_[b];
  });
  RetrievalResult result;
  const std::size_t take = std::min(k, order.size());
  for (std::size_t i = 0; i < take; ++i) result.ranked.push_back({ids_[order[i]], scores[order[i]]});
  return result;
}

void CardIndex::save(const std::filesystem::path& path) const {
  std::ostringstream os;
  os << "tabxfer-card-index 1\n";
  os << "dimension " << dimension_ << "\n";
  os << "embedder " << tag_ << "\n";
  if (vocabulary_) {
    os << "vocabulary " << vocabulary_->documents() << " " << vocabulary_->frequencies().size() << "\n";
    for (const auto& [token, df] : vocabulary_->frequencies()) os << token << " " << df << "\n";
  } else {
    os << "vocabulary none\n";
  }
  os << "entries " << ids_.size() << "\n";
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    auto row = vectors_.row(i);
    std::size_t nnz = 0;
    for (double v : row) nnz += v != 0.0;
    // ids may contain spaces; they own the whole line
    os << ids_[i] << "\n" << nnz;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] != 0.0) os << " " << j << ":" << hexfloat(row[j]);
    }
    os << "\n";
  }
  write_file(path, os.str());
}

CardIndex CardIndex::load(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  const auto fail = [&](const std::string& what) {
    raise(ErrorCode::Io, path.string() + ": malformed index (" + what + ")");
  };
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != "tabxfer-card-index" || version != 1) fail("header");
  std::size_t dimension = 0;
  if (!(in >> word >> dimension) || word != "dimension") fail("dimension");
  std::string tag;
  if (!(in >> word >> tag) || word != "embedder") fail("embedder");
  CardIndex index(dimension, tag);
  if (!(in >> word) || word != "vocabulary") fail("vocabulary");
  std::string docs_field;
  in >> docs_field;
  if (docs_field != "none") {
    std::size_t docs = 0, count = 0;
    try {
      docs = std::stoull(docs_field);
    } catch (...) {
      fail("vocabulary size");
    }
    if (!(in >> count)) fail("vocabulary count");
    std::map<std::string, std::size_t> df;
    for (std::size_t i = 0; i < count; ++i) {
      std::string token;
      std::size_t f = 0;
      if (!(in >> token >> f)) fail("vocabulary entry");
      df.emplace(token, f);
    }
    Vocabulary vocab;
    vocab.set(docs, std::move(df));
    index.vocabulary_ = std::move(vocab);
  }
  std::size_t entries = 0;
  if (!(in >> word >> entries) || word != "entries") fail("entries");
  in >> std::ws;
  for (std::size_t i = 0; i < entries; ++i) {
    std::string id;
    if (!std::getline(in, id)) fail("entry id");
    std::size_t nnz = 0;
    if (!(in >> nnz)) fail("entry size");
    std::vector<double> values(dimension, 0.0);
    for (std::size_t e = 0; e < nnz; ++e) {
      std::string cell;
      if (!(in >> cell)) fail("entry value");
      const auto colon = cell.find(':');
      if (colon == std::string::npos) fail("entry value");
      const std::size_t j = std::stoull(cell.substr(0, colon));
      if (j >= dimension) fail("entry index");
      values[j] = std::strtod(cell.c_str() + colon + 1, nullptr);
    }
    in >> std::ws;
    index.add(id, EmbeddingVector::from_values(std::move(values)));
  }
  return index;
}

HashedTfEmbedder index_embedder(const CardIndex& index) {
  return HashedTfEmbedder(index.dimension(), index.vocabulary());
}

std::string build_query(const DatasetCard& card, const QueryGenerator& adapter) {
  return adapter.generate_query(card);
}

}  // namespace tabxfer
