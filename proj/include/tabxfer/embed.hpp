#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabxfer/catalog.hpp"
#include "tabxfer/matrix.hpp"

namespace tabxfer {

inline constexpr std::size_t kDefaultEmbeddingDimension = 4096;
inline constexpr std::size_t kDefaultTopK = 5;

struct EmbeddingVector {
  std::vector<double> values;
  double norm = 0.0;

  static EmbeddingVector from_values(std::vector<double> values);
  std::size_t dimension() const noexcept { return values.size(); }
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Document frequencies over a corpus of texts; smooth idf
// ln((1 + N) / (1 + df)) + 1.
class Vocabulary {
 public:
  static Vocabulary build(const std::vector<std::string>& documents);

  double idf(const std::string& token) const;
  std::size_t documents() const noexcept { return documents_; }
  const std::map<std::string, std::size_t>& frequencies() const noexcept { return df_; }

  void set(std::size_t documents, std::map<std::string, std::size_t> df) {
    documents_ = documents;
    df_ = std::move(df);
  }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::size_t documents_ = 0;
  std::map<std::string, std::size_t> df_;
};

// Hashed term-frequency embedding: tokens weighted by 1 + ln(tf), signed
// FNV-1a feature hashing, optional idf scaling.
EmbeddingVector embed_text(std::string_view text, std::size_t dimension,
                           const Vocabulary* vocabulary = nullptr);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::string tag() const = 0;
  virtual std::size_t dimension() const = 0;
};

class HashedTfEmbedder final : public Embedder {
 public:
  explicit HashedTfEmbedder(std::size_t dimension = kDefaultEmbeddingDimension,
                            std::optional<Vocabulary> vocabulary = std::nullopt);

  EmbeddingVector embed(std::string_view text) const override;
  std::string tag() const override;
  std::size_t dimension() const override { return dimension_; }
  const std::optional<Vocabulary>& vocabulary() const noexcept { return vocabulary_; }

 private:
  std::size_t dimension_;
  std::optional<Vocabulary> vocabulary_;
};

// Name, description, feature names, feature descriptions and class labels,
// space-separated. The id is not part of the text.
std::string card_text(const DatasetCard& card);

struct RankedCard {
  std::string id;
  double score = 0.0;
  friend bool operator==(const RankedCard&, const RankedCard&) = default;
};

struct RetrievalResult {
  std::vector<RankedCard> ranked;  // score descending, ties by ascending id
};

// Exact-scan cosine index over card embeddings. Immutable once built.
class CardIndex {
 public:
  CardIndex(std::size_t dimension, std::string embedder_tag);

  // Embeds card_text of every card with `embedder`.
  static CardIndex build(const std::vector<DatasetCard>& cards, const Embedder& embedder);

  void add(const std::string& id, const EmbeddingVector& vector);

  RetrievalResult query_topk(const EmbeddingVector& query, std::size_t k) const;

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dimension() const noexcept { return dimension_; }
  const std::string& embedder_tag() const noexcept { return tag_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  EmbeddingVector vector(std::size_t i) const;

  // Vocabulary the entries were weighted with, persisted so queries can be
  // embedded identically after reload.
  const std::optional<Vocabulary>& vocabulary() const noexcept { return vocabulary_; }
  void set_vocabulary(std::optional<Vocabulary> vocabulary) { vocabulary_ = std::move(vocabulary); }

  void save(const std::filesystem::path& path) const;
  static CardIndex load(const std::filesystem::path& path);

 private:
  std::size_t dimension_;
  std::string tag_;
  std::vector<std::string> ids_;
  Matrix vectors_;
  std::vector<double> norms_;
  std::optional<Vocabulary> vocabulary_;
};

// Builds the hashed embedder the index expects for queries.
HashedTfEmbedder index_embedder(const CardIndex& index);

class QueryGenerator;

// Retrieval query for a card, produced by whichever adapter is supplied.
std::string build_query(const DatasetCard& card, const QueryGenerator& adapter);

}  // namespace tabxfer
