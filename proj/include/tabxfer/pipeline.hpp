#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tabxfer/catalog.hpp"
#include "tabxfer/embed.hpp"
#include "tabxfer/harmonize.hpp"
#include "tabxfer/llm_adapter.hpp"
#include "tabxfer/optimal_transport.hpp"
#include "tabxfer/transfer.hpp"

namespace tabxfer {

// Everything a run needs, read from the same `key = value` dialect as cards.
// Relative paths resolve against the config file's directory.
struct PipelineConfig {
  std::filesystem::path library_dir;
  std::filesystem::path target_card;
  std::filesystem::path index_path;  // optional prebuilt index
  std::filesystem::path output_dir = "tabxfer-out";
  std::size_t k = 5;
  std::string embedder = "hashed-tf";  // hashed-tf | remote
  std::size_t embed_dimension = kDefaultEmbeddingDimension;
  bool embed_idf = true;
  KernelConfig kernel;
  SinkhornOptions sinkhorn;
  MappingSearchOptions mapping;
  std::size_t sample_cap = 512;
  TransferConfig transfer;
  std::vector<double> alpha_grid;
  AdapterKind adapter = AdapterKind::Stub;
  RemoteSettings remote;
  std::uint64_t seed = 0;
  double test_fraction = 0.3;
  double val_fraction = 0.2;

  static PipelineConfig parse(std::string_view text, const std::filesystem::path& base_dir,
                              const std::string& origin = "<config>");
  static PipelineConfig load(const std::filesystem::path& path);

  // TABXFER_ADAPTER_ENDPOINT, TABXFER_ADAPTER_MODEL and TABXFER_SEED.
  void apply_environment();
  void set_seed(std::uint64_t value);
  void validate() const;
  // Canonical key/value rendering of every effective setting.
  std::string snapshot() const;
};

struct TargetSplits {
  LabeledTable train;
  LabeledTable val;
  LabeledTable test;
  LabeledTable reference;  // train + val, what candidates are harmonized against
  bool stratification_fallback = false;
};

// Test rows are split off first; the rest is split into train and
// validation. Both draws are seeded from `seed`.
TargetSplits make_target_splits(const LabeledTable& target, double test_fraction, double val_fraction,
                                std::uint64_t seed);

// Adapter selected by the config, with a transcript sink.
std::unique_ptr<QueryGenerator> make_adapter(const PipelineConfig& config, Transcript* transcript);
std::unique_ptr<Embedder> make_embedder(const PipelineConfig& config, const std::vector<DatasetCard>& library,
                                        Transcript* transcript);

// Library cards minus the target, indexed with the configured embedder (or
// loaded from index_path when given).
CardIndex build_candidate_index(const PipelineConfig& config, const std::vector<DatasetCard>& library,
                                const DatasetCard& target, const Embedder& embedder);

struct CandidateHarmonization {
  FeatureMapping mapping;
  ClassAlignment classes;
  LabeledTable harmonized;
  HarmonizationReport report;
};

CandidateHarmonization harmonize_candidate(const DatasetCard& source_card, const LabeledTable& source_table,
                                           const DatasetCard& target_card, const LabeledTable& target_reference,
                                           const MappingHints& hints, const PipelineConfig& config);

struct CandidateSummary {
  std::string id;
  double retrieval_score = 0.0;
  bool harmonized = false;
  std::string error;  // "<Code>: message" when harmonization failed
  double pooled_wasserstein = 0.0;
  double kernel_distance_before = 0.0;
  double kernel_distance_after = 0.0;
  std::string report;  // serialized HarmonizationReport
};

// Minimal pooled Wasserstein among harmonized candidates; ties go to the
// higher retrieval score, then the smaller id. Empty when none harmonized.
std::optional<std::size_t> select_source(const std::vector<CandidateSummary>& candidates);

struct RunReport {
  std::string target_id;
  std::string adapter;
  std::string adapter_note;  // fallback notice, empty otherwise
  std::string query;
  RetrievalResult ranking;
  std::vector<CandidateSummary> candidates;
  std::string chosen_source;
  std::string selection_rule = "min pooled Wasserstein after harmonization; ties: higher retrieval score, then smaller id";
  std::string chosen_mapping;  // serialized mapping of the chosen source
  double alpha = 0.0;
  std::optional<SweepResult> sweep;
  std::size_t train_rows = 0;
  std::size_t val_rows = 0;
  std::size_t test_rows = 0;
  TrainingLog baseline_log;
  TrainingLog transfer_log;
  MetricReport baseline;
  MetricReport transfer;
  std::string config_snapshot;
  std::filesystem::path transcript_path;
};

// Runs the pipeline and writes its artifacts under config.output_dir.
RunReport run_pipeline(const PipelineConfig& config);

struct TransferOutcome {
  double alpha = 0.0;
  TrainingLog baseline_log;
  TrainingLog transfer_log;
  MetricReport baseline;
  MetricReport transfer;
};

// Baseline (alpha 0) and transfer runs with identical seeds, both
// evaluated on the test split.
TransferOutcome train_and_evaluate(const LabeledTable& harmonized, const TargetSplits& splits,
                                   const TransferConfig& config);

std::string render_run_report(const RunReport& report, const std::string& generated_at);
std::string render_summary(const RunReport& report);
std::string render_transfer_outcome(const TransferOutcome& outcome);

}  // namespace tabxfer
