#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tabxfer/catalog.hpp"
#include "tabxfer/harmonize.hpp"
#include "tabxfer/matrix.hpp"
#include "tabxfer/random.hpp"

// Seeded data generators used by the tests, the benchmarks and the demo
// library writer.
namespace tabxfer::synthetic {

// Skewed unit-variance columns, mixed linearly, with a logistic binary label.
struct GenerativeProcess {
  std::size_t features = 0;
  Matrix mixing;                     // x = mixing * u, then scaled to unit variance
  std::vector<double> column_scale;  // 1 / sd of each mixed column
  std::vector<double> weights;
  double bias = 0.0;

  static GenerativeProcess make(std::uint64_t seed, std::size_t features = 6, double mixing_strength = 0.5,
                                double signal = 3.0);
  std::pair<Matrix, std::vector<int>> sample(std::size_t n, Rng& rng) const;
};

LabeledTable make_table(Matrix features, std::vector<int> labels, std::vector<std::string> names,
                        std::size_t class_count, std::string card_ref);

DatasetCard make_card(std::string id, std::string name, std::string description, std::vector<std::string> features,
                      std::string target, std::vector<std::string> classes);

struct ShiftedDomainOptions {
  std::uint64_t seed = 0;
  std::size_t target_labeled = 60;
  std::size_t target_test = 200;
  std::size_t source_rows = 2000;
  std::size_t features = 6;
  double signal = 4.0;  // norm of the logistic weight vector
};

// Target and source share one generative process. The source's columns are
// permuted and each passes through a positive-scale affine shift.
struct ShiftedDomainTask {
  DatasetCard target_card;
  DatasetCard source_card;
  LabeledTable target_labeled;
  LabeledTable target_test;
  LabeledTable source;
  std::vector<int> target_to_source;
  std::vector<AffineTransform> source_shift;  // per source column
};

ShiftedDomainTask make_shifted_domain_task(const ShiftedDomainOptions& options);

// Source = target rows reshuffled, columns permuted, affinely transformed and
// renamed to meaningless tokens.
struct CloneInstance {
  DatasetCard target_card;
  DatasetCard source_card;
  LabeledTable target;
  LabeledTable source;
  std::vector<int> target_to_source;
};

CloneInstance make_permuted_clone(std::uint64_t seed, std::size_t features, std::size_t rows);

// `size` cards: the target, one paraphrased twin of it, and distractors on
// unrelated topics, in seeded order with seeded ids.
struct CardCorpus {
  std::vector<DatasetCard> cards;
  std::string target_id;
  std::string twin_id;
};

CardCorpus make_card_corpus(std::uint64_t seed, std::size_t size = 20);

void write_table_csv(const LabeledTable& table, const DatasetCard& card, const std::filesystem::path& path);

// Writes `card` (data_path is set to <id>.csv beside it) plus its table.
void write_dataset(const std::filesystem::path& dir, DatasetCard card, const LabeledTable& table);

struct DemoLibrary {
  std::filesystem::path target_card;
  std::string twin_id;
  std::vector<std::string> distractor_ids;
};

// A target (labeled plus test rows in one file), its shifted twin and
// `distractors` unrelated datasets with data.
DemoLibrary write_demo_library(const std::filesystem::path& dir, std::uint64_t seed, std::size_t distractors = 9);

// 570 x 30 table with the Wisconsin diagnostic feature names and M/B labels.
std::pair<DatasetCard, LabeledTable> make_breast_cancer_fixture(std::uint64_t seed);

}  // namespace tabxfer::synthetic
