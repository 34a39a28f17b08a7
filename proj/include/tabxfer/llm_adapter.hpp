#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "tabxfer/catalog.hpp"
#include "tabxfer/embed.hpp"
#include "tabxfer/error.hpp"

namespace tabxfer {

enum class AdapterKind { Stub, Remote };

std::string to_string(AdapterKind kind);
AdapterKind parse_adapter_kind(std::string_view text);

inline constexpr int kMaxAdapterAttempts = 5;

struct RemoteSettings {
  std::string endpoint;  // http://host:port/path
  std::string model;
  int timeout_ms = 30000;
  int max_attempts = kMaxAdapterAttempts;  // 1..5
  int backoff_base_ms = 1000;
  double backoff_factor = 2.0;
  int max_in_flight = 2;

  void validate() const;
};

struct HintPair {
  std::string source;
  std::string target;
  double confidence = 0.0;
  friend bool operator==(const HintPair&, const HintPair&) = default;
};

// Advisory pairings; the harmonizer's objective has the final say.
struct MappingHints {
  std::vector<HintPair> pairs;
  std::vector<HintPair> class_pairs;
  AdapterKind provenance = AdapterKind::Stub;
};

// Appends prompts and responses to a run-scoped audit file. Thread-safe.
class Transcript {
 public:
  Transcript() = default;
  explicit Transcript(std::filesystem::path path);

  void append(std::string_view kind, std::string_view text);
  const std::filesystem::path& path() const noexcept { return path_; }
  bool enabled() const noexcept { return !path_.empty(); }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

// Every language-model dependent step of the pipeline goes through here.
class QueryGenerator {
 public:
  virtual ~QueryGenerator() = default;
  virtual AdapterKind kind() const = 0;
  virtual std::string generate_query(const DatasetCard& card) const = 0;
  virtual MappingHints mapping_hints(const DatasetCard& source, const DatasetCard& target) const = 0;
};

std::string stub_generate_query(const DatasetCard& card);
MappingHints stub_mapping_hints(const DatasetCard& source, const DatasetCard& target);

// Token-set Jaccard overlap of two names after tokenization.
double name_overlap(std::string_view a, std::string_view b);

class StubAdapter final : public QueryGenerator {
 public:
  explicit StubAdapter(Transcript* transcript = nullptr) : transcript_(transcript) {}
  AdapterKind kind() const override { return AdapterKind::Stub; }
  std::string generate_query(const DatasetCard& card) const override;
  MappingHints mapping_hints(const DatasetCard& source, const DatasetCard& target) const override;

 private:
  Transcript* transcript_;
};

struct AttemptRecord {
  int attempt = 0;
  bool ok = false;
  std::string detail;
};

struct Completion {
  std::string text;
  std::vector<AttemptRecord> attempts;
};

// Error raised after the last attempt; keeps the attempt log.
class AdapterFailure : public Error {
 public:
  AdapterFailure(const std::string& message, std::vector<AttemptRecord> attempts)
      : Error(ErrorCode::AdapterFailure, message), attempts_(std::move(attempts)) {}
  const std::vector<AttemptRecord>& attempts() const noexcept { return attempts_; }

 private:
  std::vector<AttemptRecord> attempts_;
};

// POSTs {"model", "prompt"} as JSON and expects {"completion": "..."}.
// Transport failures and malformed bodies are retried with exponential
// backoff up to settings.max_attempts.
Completion remote_complete(const std::string& prompt, const RemoteSettings& settings,
                           Transcript* transcript = nullptr);

// Parses `source -> target : confidence` lines (and `class: a -> b : c`),
// dropping anything that names a column or class the cards do not have.
MappingHints parse_hint_response(std::string_view text, const DatasetCard& source,
                                 const DatasetCard& target);

std::string query_prompt(const DatasetCard& card);
std::string hint_prompt(const DatasetCard& source, const DatasetCard& target);

class RemoteAdapter final : public QueryGenerator {
 public:
  explicit RemoteAdapter(RemoteSettings settings, Transcript* transcript = nullptr);

  AdapterKind kind() const override { return AdapterKind::Remote; }
  std::string generate_query(const DatasetCard& card) const override;
  MappingHints mapping_hints(const DatasetCard& source, const DatasetCard& target) const override;

  Completion complete(const std::string& prompt) const;

 private:
  RemoteSettings settings_;
  Transcript* transcript_;
  std::unique_ptr<std::counting_semaphore<64>> in_flight_;
};

// External embedding endpoint: POST {"model", "text"} -> {"embedding": [...]}.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(RemoteSettings settings, std::size_t dimension, Transcript* transcript = nullptr);

  EmbeddingVector embed(std::string_view text) const override;
  std::string tag() const override;
  std::size_t dimension() const override { return dimension_; }

 private:
  RemoteSettings settings_;
  std::size_t dimension_;
  Transcript* transcript_;
};

}  // namespace tabxfer
