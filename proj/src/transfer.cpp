#include "tabxfer/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

#include "tabxfer/kv.hpp"
#include "tabxfer/random.hpp"

namespace tabxfer {
namespace {

Matrix scaled_inputs(const ModelParams& model, const Matrix& x) {
  if (x.cols() != model.input_dim) {
    raise(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model.input_dim) + " features, got " +
                                            std::to_string(x.cols()));
  }
  Matrix z = x;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = (z(i, j) - model.scaler.mean[j]) / model.scaler.scale[j];
  }
  return z;
}

// out = a * w + b (rows of a times w, bias broadcast over rows)
Matrix affine_layer(const Matrix& a, const Matrix& w, const std::vector<double>& b) {
  Matrix out(a.rows(), w.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    std::copy(b.begin(), b.end(), o.begin());
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double v = a(i, k);
      if (v == 0.0) continue;
      auto wr = w.row(k);
      for (std::size_t c = 0; c < w.cols(); ++c) o[c] += v * wr[c];
    }
  }
  return out;
}

struct Forward {
  Matrix z;
  Matrix hidden;  // MLP only
  Matrix logits;
};

Forward forward(const ModelParams& model, const Matrix& x) {
  Forward f;
  f.z = scaled_inputs(model, x);
  if (model.kind == LearnerKind::Logistic) {
    f.logits = affine_layer(f.z, model.w1, model.b1);
  } else {
    f.hidden = affine_layer(f.z, model.w1, model.b1);
    for (double& v : f.hidden.data()) v = std::tanh(v);
    f.logits = affine_layer(f.hidden, model.w2, model.b2);
  }
  return f;
}

void check_labels(const ModelParams& model, const Batch& batch) {
  if (batch.features.rows() != batch.labels.size()) {
    raise(ErrorCode::SizeMismatch, "batch features and labels differ in length");
  }
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.class_count) {
      raise(ErrorCode::LabelSpaceMismatch, "label " + std::to_string(y) + " outside the model's classes");
    }
  }
}

// Adds weight * d(mean CE)/d(params) into grad and returns the mean CE.
double accumulate(const ModelParams& model, const Batch& batch, double weight, ModelParams* grad) {
  check_labels(model, batch);
  const Forward f = forward(model, batch.features);
  const std::size_t n = batch.size();
  const std::size_t c_count = model.class_count;
  Matrix dlogits(n, c_count);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = f.logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    const auto y = static_cast<std::size_t>(batch.labels[i]);
    total += lse - row[y];
    for (std::size_t c = 0; c < c_count; ++c) {
      dlogits(i, c) = weight * (std::exp(row[c] - lse) - (c == y ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  if (grad) {
    const Matrix& last_input = model.kind == LearnerKind::Logistic ? f.z : f.hidden;
    Matrix& w_last = model.kind == LearnerKind::Logistic ? grad->w1 : grad->w2;
    std::vector<double>& b_last = model.kind == LearnerKind::Logistic ? grad->b1 : grad->b2;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < last_input.cols(); ++k) {
        const double v = last_input(i, k);
        for (std::size_t c = 0; c < c_count; ++c) w_last(k, c) += v * dlogits(i, c);
      }
      for (std::size_t c = 0; c < c_count; ++c) b_last[c] += dlogits(i, c);
    }
    if (model.kind == LearnerKind::Mlp) {
      const std::size_t h = model.hidden_width;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < h; ++j) {
          double dh = 0.0;
          for (std::size_t c = 0; c < c_count; ++c) dh += dlogits(i, c) * model.w2(j, c);
          const double hv = f.hidden(i, j);
          const double da = dh * (1.0 - hv * hv);
          for (std::size_t k = 0; k < model.input_dim; ++k) grad->w1(k, j) += f.z(i, k) * da;
          grad->b1[j] += da;
        }
      }
    }
  }
  return total / static_cast<double>(n);
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) raise(ErrorCode::InvalidArgument, "alpha must lie in [0, 1]");
}

double loss_and_gradient(const ModelParams& model, const Batch& source, const Batch& target, double alpha,
                         ModelParams* grad) {
  check_alpha(alpha);
  if (alpha > 0.0 && source.size() == 0) {
    raise(ErrorCode::EmptyWeightedBatch, "source batch is empty but carries weight " + format_double(alpha));
  }
  if (alpha < 1.0 && target.size() == 0) {
    raise(ErrorCode::EmptyWeightedBatch, "target batch is empty but carries weight " + format_double(1.0 - alpha));
  }
  const double source_loss = alpha > 0.0 ? accumulate(model, source, alpha, grad) : 0.0;
  const double target_loss = alpha < 1.0 ? accumulate(model, target, 1.0 - alpha, grad) : 0.0;
  return alpha * source_loss + (1.0 - alpha) * target_loss;
}

ModelParams zero_like(const ModelParams& model) {
  ModelParams g = model;
  std::fill(g.w1.data().begin(), g.w1.data().end(), 0.0);
  std::fill(g.b1.begin(), g.b1.end(), 0.0);
  std::fill(g.w2.data().begin(), g.w2.data().end(), 0.0);
  std::fill(g.b2.begin(), g.b2.end(), 0.0);
  return g;
}

// Endless stream of row indices: a seeded permutation per pass, reshuffled
// whenever it runs out.
class IndexStream {
 public:
  IndexStream(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), 0);
  }

  void reshuffle() {
    rng_.shuffle(std::span<std::size_t>(order_));
    cursor_ = 0;
  }

  std::vector<std::size_t> take(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
      if (cursor_ == order_.size()) reshuffle();
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

}  // namespace

std::string to_string(LearnerKind kind) { return kind == LearnerKind::Logistic ? "logistic" : "mlp"; }

LearnerKind parse_learner_kind(const std::string& text) {
  if (text == "logistic") return LearnerKind::Logistic;
  if (text == "mlp") return LearnerKind::Mlp;
  raise(ErrorCode::InvalidConfig, "unknown learner '" + text + "' (expected logistic or mlp)");
}

InputScaler InputScaler::identity(std::size_t p) { return {std::vector<double>(p, 0.0), std::vector<double>(p, 1.0)}; }

InputScaler InputScaler::fit(const Matrix& x) {
  InputScaler s = identity(x.cols());
  if (x.rows() == 0) return s;
  const auto n = static_cast<double>(x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) sum += x(i, j);
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) sq += (x(i, j) - mean) * (x(i, j) - mean);
    const double sd = std::sqrt(sq / n);
    s.mean[j] = mean;
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

std::size_t ModelParams::parameter_count() const { return w1.data().size() + b1.size() + w2.data().size() + b2.size(); }

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  out.insert(out.end(), w1.data().begin(), w1.data().end());
  out.insert(out.end(), b1.begin(), b1.end());
  out.insert(out.end(), w2.data().begin(), w2.data().end());
  out.insert(out.end(), b2.begin(), b2.end());
  return out;
}

void ModelParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) raise(ErrorCode::SizeMismatch, "flat parameter vector has the wrong length");
  auto it = flat.begin();
  const auto fill = [&](auto& dst) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  fill(w1.data());
  fill(b1);
  fill(w2.data());
  fill(b2);
}

bool ModelParams::all_finite() const {
  const auto finite = [](const auto& v) { return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }); };
  return finite(w1.data()) && finite(b1) && finite(w2.data()) && finite(b2);
}

void TransferConfig::validate() const {
  check_alpha(alpha);
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) raise(ErrorCode::InvalidConfig, "learning_rate must be positive");
  if (max_epochs < 1) raise(ErrorCode::InvalidConfig, "max_epochs must be at least 1");
  if (patience < 1 || patience > max_epochs) raise(ErrorCode::InvalidConfig, "patience must lie in [1, max_epochs]");
  if (learner == LearnerKind::Mlp && hidden_width == 0) raise(ErrorCode::InvalidConfig, "hidden_width must be positive");
}

std::size_t resolve_batch_size(const TransferConfig& config, std::size_t target_rows) {
  if (config.batch_size > 0) return config.batch_size;
  return target_rows >= kLargeTableRows ? 512 : 32;
}

ModelParams init_model(std::size_t p, std::size_t class_count, const TransferConfig& config) {
  if (p < 1) raise(ErrorCode::InvalidArgument, "model needs at least one feature");
  if (class_count < 2) raise(ErrorCode::InvalidArgument, "model needs at least two classes");
  ModelParams m;
  m.kind = config.learner;
  m.input_dim = p;
  m.class_count = class_count;
  m.scaler = InputScaler::identity(p);
  Rng rng(derive_seed(config.seed, 100));
  const auto init = [&](Matrix& w, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
  };
  if (config.learner == LearnerKind::Logistic) {
    m.w1 = Matrix(p, class_count);
    m.b1.assign(class_count, 0.0);
    init(m.w1, p);
  } else {
    const std::size_t h = config.hidden_width;
    m.hidden_width = h;
    m.w1 = Matrix(p, h);
    m.b1.assign(h, 0.0);
    m.w2 = Matrix(h, class_count);
    m.b2.assign(class_count, 0.0);
    init(m.w1, p);
    init(m.w2, h);
  }
  return m;
}

Batch Batch::from_table(const LabeledTable& table) { return {table.features, table.labels}; }

Batch Batch::rows_of(const LabeledTable& table, std::span<const std::size_t> rows) {
  Batch b;
  b.features = table.features.select_rows(rows);
  b.labels.reserve(rows.size());
  for (std::size_t r : rows) b.labels.push_back(table.labels[r]);
  return b;
}

Matrix logits(const ModelParams& model, const Matrix& x) { return forward(model, x).logits; }

std::vector<int> predict(const ModelParams& model, const Matrix& x) {
  const Matrix l = logits(model, x);
  std::vector<int> out(l.rows());
  for (std::size_t i = 0; i < l.rows(); ++i) {
    auto row = l.row(i);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double cross_entropy(const ModelParams& model, const Batch& batch) {
  if (batch.size() == 0) raise(ErrorCode::EmptyWeightedBatch, "cross-entropy of an empty batch");
  return accumulate(model, batch, 1.0, nullptr);
}

double weighted_loss(const ModelParams& model, const Batch& source, const Batch& target, double alpha) {
  return loss_and_gradient(model, source, target, alpha, nullptr);
}

ModelParams gradient(const ModelParams& model, const Batch& source, const Batch& target, double alpha) {
  ModelParams g = zero_like(model);
  loss_and_gradient(model, source, target, alpha, &g);
  return g;
}

MetricReport metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                      std::size_t class_count) {
  if (truth.size() != predicted.size()) raise(ErrorCode::SizeMismatch, "truth and predictions differ in length");
  if (truth.empty()) raise(ErrorCode::EmptyTable, "cannot evaluate on zero rows");
  MetricReport r;
  r.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= class_count || static_cast<std::size_t>(p) >= class_count) {
      raise(ErrorCode::LabelSpaceMismatch, "label outside the class range");
    }
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < class_count; ++c) {
    const std::size_t tp = r.confusion[c][c];
    correct += tp;
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < class_count; ++k) {
      row += r.confusion[c][k];
      col += r.confusion[k][c];
    }
    ClassMetrics m;
    m.support = row;
    m.precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    m.recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    r.per_class.push_back(m);
  }
  const auto c = static_cast<double>(class_count);
  r.macro_precision /= c;
  r.macro_recall /= c;
  r.macro_f1 /= c;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  return r;
}

MetricReport evaluate(const ModelParams& model, const LabeledTable& table) {
  if (table.class_count != model.class_count) {
    raise(ErrorCode::LabelSpaceMismatch, "table has " + std::to_string(table.class_count) + " classes, model has " +
                                             std::to_string(model.class_count));
  }
  return metrics_from_predictions(table.labels, predict(model, table.features), model.class_count);
}

std::string serialize_log(const TrainingLog& log) {
  std::ostringstream os;
  os << "batch_size = " << log.batch_size << "\n";
  os << "steps_per_epoch = " << log.steps_per_epoch << "\n";
  os << "best_epoch = " << log.best_epoch << "\n";
  os << "best_val_macro_f1 = " << format_double(log.best_val_macro_f1) << "\n";
  os << "stopped_early = " << (log.stopped_early ? "true" : "false") << "\n";
  for (const auto& e : log.epochs) {
    os << "epoch." << e.epoch << " = loss " << format_double(e.train_loss) << " | val_macro_f1 "
       << format_double(e.val_macro_f1) << (e.improved ? " | best" : "") << "\n";
  }
  return os.str();
}

std::string serialize_metrics(const MetricReport& r, const std::string& prefix) {
  std::ostringstream os;
  os << prefix << ".accuracy = " << format_double(r.accuracy) << "\n";
  os << prefix << ".macro_precision = " << format_double(r.macro_precision) << "\n";
  os << prefix << ".macro_recall = " << format_double(r.macro_recall) << "\n";
  os << prefix << ".macro_f1 = " << format_double(r.macro_f1) << "\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    os << prefix << ".class." << c << " = precision " << format_double(m.precision) << " | recall "
       << format_double(m.recall) << " | f1 " << format_double(m.f1) << " | support " << m.support << "\n";
  }
  for (std::size_t c = 0; c < r.confusion.size(); ++c) {
    os << prefix << ".confusion." << c << " =";
    for (std::size_t k = 0; k < r.confusion[c].size(); ++k) os << (k ? ", " : " ") << r.confusion[c][k];
    os << "\n";
  }
  return os.str();
}

TrainResult train(ModelParams model, const LabeledTable& source, const LabeledTable& target_train,
                  const LabeledTable& target_val, const TransferConfig& config, const TrainHooks& hooks) {
  config.validate();
  const double alpha = config.alpha;
  const bool use_source = alpha > 0.0;
  const bool use_target = alpha < 1.0;
  const auto check_table = [&](const LabeledTable& t, const char* what) {
    if (t.class_count != model.class_count) {
      raise(ErrorCode::LabelSpaceMismatch, std::string(what) + " has " + std::to_string(t.class_count) +
                                               " classes, the model has " + std::to_string(model.class_count));
    }
    if (t.cols() != model.input_dim) {
      raise(ErrorCode::DimensionMismatch, std::string(what) + " has " + std::to_string(t.cols()) +
                                              " features, the model expects " + std::to_string(model.input_dim));
    }
  };
  if (use_source) {
    if (source.rows() == 0) raise(ErrorCode::EmptyWeightedBatch, "source table is empty but alpha > 0");
    check_table(source, "source");
  }
  if (use_target) {
    if (target_train.rows() == 0) raise(ErrorCode::EmptyWeightedBatch, "target table is empty but alpha < 1");
    check_table(target_train, "target_train");
  }
  if (target_val.rows() == 0) raise(ErrorCode::EmptyTable, "validation table is empty");
  check_table(target_val, "target_val");

  if (config.standardize_inputs) {
    model.scaler = InputScaler::fit(use_target ? target_train.features : source.features);
  }

  TrainingLog log;
  const std::size_t batch = resolve_batch_size(config, target_train.rows());
  const std::size_t longest = std::max(use_source ? source.rows() : 0, use_target ? target_train.rows() : 0);
  log.batch_size = batch;
  log.steps_per_epoch = (longest + batch - 1) / batch;

  IndexStream source_stream(use_source ? source.rows() : 0, derive_seed(config.seed, 201));
  IndexStream target_stream(use_target ? target_train.rows() : 0, derive_seed(config.seed, 202));
  const Batch empty;

  ModelParams best = model;
  double best_f1 = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (use_source) source_stream.reshuffle();
    if (use_target) target_stream.reshuffle();
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < log.steps_per_epoch; ++step) {
      Batch sb, tb;
      if (use_source) {
        const auto rows = source_stream.take(batch);
        sb = Batch::rows_of(source, rows);
      }
      if (use_target) {
        const auto rows = target_stream.take(batch);
        tb = Batch::rows_of(target_train, rows);
      }
      ModelParams grad = zero_like(model);
      const double loss = loss_and_gradient(model, use_source ? sb : empty, use_target ? tb : empty, alpha, &grad);
      if (!std::isfinite(loss)) {
        throw DivergedLossError("non-finite training loss at epoch " + std::to_string(epoch), log);
      }
      if (hooks.on_gradient) hooks.on_gradient(grad);
      auto params = model.flatten();
      const auto g = grad.flatten();
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= config.learning_rate * g[k];
      model.assign(params);
      if (!model.all_finite()) {
        throw DivergedLossError("parameters became non-finite at epoch " + std::to_string(epoch), log);
      }
      loss_sum += loss;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = log.steps_per_epoch ? loss_sum / static_cast<double>(log.steps_per_epoch) : 0.0;
    rec.val_macro_f1 = evaluate(model, target_val).macro_f1;
    if (rec.val_macro_f1 > best_f1) {
      best_f1 = rec.val_macro_f1;
      best = model;
      rec.improved = true;
      log.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    log.epochs.push_back(rec);
    if (since_best >= config.patience) {
      log.stopped_early = true;
      break;
    }
  }
  log.best_val_macro_f1 = best_f1;
  return {std::move(best), std::move(log)};
}

TrainResult train(const LabeledTable& source, const LabeledTable& target_train, const LabeledTable& target_val,
                  const TransferConfig& config, const TrainHooks& hooks) {
  const std::size_t p = target_train.rows() ? target_train.cols() : source.cols();
  const std::size_t classes = target_train.rows() ? target_train.class_count : source.class_count;
  return train(init_model(p, classes, config), source, target_train, target_val, config, hooks);
}

SweepResult alpha_sweep(const LabeledTable& source, const LabeledTable& target_train,
                        const LabeledTable& target_val, std::span<const double> grid, const TransferConfig& config) {
  if (grid.empty()) raise(ErrorCode::InvalidArgument, "alpha grid is empty");
  for (double a : grid) check_alpha(a);
  SweepResult result;
  result.entries.resize(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  const auto n = static_cast<long>(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      TransferConfig c = config;
      c.alpha = grid[static_cast<std::size_t>(i)];
      TrainResult r = train(source, target_train, target_val, c);
      auto& e = result.entries[static_cast<std::size_t>(i)];
      e.alpha = c.alpha;
      e.validation = evaluate(r.model, target_val);
      e.log = std::move(r.log);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  double best_f1 = -1.0;
  for (const auto& e : result.entries) {
    if (e.validation.macro_f1 > best_f1 || (e.validation.macro_f1 == best_f1 && e.alpha < result.best_alpha)) {
      best_f1 = e.validation.macro_f1;
      result.best_alpha = e.alpha;
    }
  }
  return result;
}

}  // namespace tabxfer
