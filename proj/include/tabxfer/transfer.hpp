#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tabxfer/catalog.hpp"
#include "tabxfer/error.hpp"
#include "tabxfer/matrix.hpp"

namespace tabxfer {

enum class LearnerKind { Logistic, Mlp };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner_kind(const std::string& text);

// Fixed per-column centering and scaling applied before the first layer.
// It is fitted once from the target training rows and is not trained.
struct InputScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static InputScaler identity(std::size_t p);
  static InputScaler fit(const Matrix& x);
  friend bool operator==(const InputScaler&, const InputScaler&) = default;
};

// Logistic: w1 is p x C, b1 has C entries, w2/b2 are empty.
// MLP: w1 is p x h with tanh activation, w2 is h x C.
struct ModelParams {
  LearnerKind kind = LearnerKind::Logistic;
  std::size_t input_dim = 0;
  std::size_t class_count = 0;
  std::size_t hidden_width = 0;
  Matrix w1;
  std::vector<double> b1;
  Matrix w2;
  std::vector<double> b2;
  InputScaler scaler;

  std::size_t parameter_count() const;
  // Trainable parameters in a fixed order: w1, b1, w2, b2.
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  bool all_finite() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct TransferConfig {
  double alpha = 0.5;
  double learning_rate = 0.02;
  std::size_t batch_size = 0;  // 0 picks 512 or 32 from the target training size
  int max_epochs = 100;
  int patience = 20;
  std::uint64_t seed = 0;
  LearnerKind learner = LearnerKind::Logistic;
  std::size_t hidden_width = 32;
  bool standardize_inputs = true;

  void validate() const;
};

inline constexpr std::size_t kLargeTableRows = 5000;
std::size_t resolve_batch_size(const TransferConfig& config, std::size_t target_rows);

ModelParams init_model(std::size_t p, std::size_t class_count, const TransferConfig& config);

struct Batch {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  static Batch from_table(const LabeledTable& table);
  static Batch rows_of(const LabeledTable& table, std::span<const std::size_t> rows);
};

Matrix logits(const ModelParams& model, const Matrix& x);
std::vector<int> predict(const ModelParams& model, const Matrix& x);

// Mean cross-entropy of one batch, stabilized by log-sum-exp.
double cross_entropy(const ModelParams& model, const Batch& batch);

// alpha * CE(source) + (1 - alpha) * CE(target). A side whose weight is
// zero is not evaluated and may be empty.
double weighted_loss(const ModelParams& model, const Batch& source, const Batch& target, double alpha);

// Gradient of weighted_loss, shaped like the model (scaler copied through).
ModelParams gradient(const ModelParams& model, const Batch& source, const Batch& target, double alpha);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  // confusion[truth][prediction]
  std::vector<std::vector<std::size_t>> confusion;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                      std::size_t class_count);
MetricReport evaluate(const ModelParams& model, const LabeledTable& table);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_macro_f1 = 0.0;
  bool improved = false;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_macro_f1 = 0.0;
  std::size_t batch_size = 0;
  std::size_t steps_per_epoch = 0;
  bool stopped_early = false;
  friend bool operator==(const TrainingLog&, const TrainingLog&) = default;
};

std::string serialize_log(const TrainingLog& log);
std::string serialize_metrics(const MetricReport& report, const std::string& prefix);

// Raised when the loss or the parameters stop being finite. Keeps the log
// up to the last finite epoch.
class DivergedLossError : public Error {
 public:
  DivergedLossError(const std::string& message, TrainingLog log)
      : Error(ErrorCode::DivergedLoss, message), log_(std::move(log)) {}
  const TrainingLog& log() const noexcept { return log_; }

 private:
  TrainingLog log_;
};

struct TrainHooks {
  // Called with each step's gradient before the update; may modify it.
  std::function<void(ModelParams&)> on_gradient;
};

struct TrainResult {
  ModelParams model;  // parameters from the best validation epoch
  TrainingLog log;
};

TrainResult train(ModelParams model, const LabeledTable& source, const LabeledTable& target_train,
                  const LabeledTable& target_val, const TransferConfig& config, const TrainHooks& hooks = {});

// Initializes from config.seed and trains.
TrainResult train(const LabeledTable& source, const LabeledTable& target_train, const LabeledTable& target_val,
                  const TransferConfig& config, const TrainHooks& hooks = {});

struct SweepEntry {
  double alpha = 0.0;
  MetricReport validation;
  TrainingLog log;
  friend bool operator==(const SweepEntry&, const SweepEntry&) = default;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  double best_alpha = 0.0;
};

// One training run per grid value with the config's seed; best by
// validation macro-F1, ties to the smaller alpha.
SweepResult alpha_sweep(const LabeledTable& source, const LabeledTable& target_train,
                        const LabeledTable& target_val, std::span<const double> grid, const TransferConfig& config);

}  // namespace tabxfer
