#include "tabxfer/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <map>
#include <set>
#include <sstream>

#include "tabxfer/error.hpp"
#include "tabxfer/kv.hpp"
#include "tabxfer/random.hpp"

namespace tabxfer {
namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "library_dir",          "target_card",           "index_path",          "output_dir",
      "k",                    "seed",                  "embedder",            "embed.dimension",
      "embed.idf",            "kernel.bandwidth",      "sinkhorn.epsilon",    "sinkhorn.max_iter",
      "sinkhorn.tol",         "mapping.name_weight",   "mapping.profile_weight", "mapping.hint_weight",
      "mapping.hint_bonus",   "mapping.affinity_floor", "mapping.max_perturbations",
      "mapping.perturbation_margin", "mapping.sample_cap", "mapping.quantiles",
      "transfer.alpha",       "transfer.learning_rate", "transfer.batch_size", "transfer.max_epochs",
      "transfer.patience",    "transfer.learner",      "transfer.hidden_width", "sweep.grid",
      "adapter.kind",         "adapter.endpoint",      "adapter.model",       "adapter.timeout_ms",
      "adapter.max_attempts", "adapter.backoff_ms",    "split.test_fraction", "split.val_fraction",
  };
  return keys;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  raise(ErrorCode::InvalidConfig, key + ": expected true or false, got '" + v + "'");
}

std::size_t parse_count(const KeyValueFile& kv, const std::string& key, std::size_t fallback) {
  const long long v = kv.get_int(key, static_cast<long long>(fallback));
  if (v < 0) raise(ErrorCode::InvalidConfig, key + " must not be negative");
  return static_cast<std::size_t>(v);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

// Prefixes every `key = value` line; comments and blank lines are dropped.
std::string prefix_lines(const std::string& text, const std::string& prefix) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    out << prefix << line << "\n";
  }
  return out.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

[[noreturn]] void rethrow_as_stage(const std::string& stage, const std::string& candidate) {
  try {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(e.code(), stage, candidate, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageError(ErrorCode::Io, stage, candidate, e.what());
  }
}


}  // namespace

PipelineConfig PipelineConfig::parse(std::string_view text, const std::filesystem::path& base_dir,
                                     const std::string& origin) {
  const KeyValueFile kv = KeyValueFile::parse(text, origin);
  for (const auto& e : kv.entries()) {
    if (!known_keys().count(e.key)) {
      raise(ErrorCode::InvalidConfig, origin + ":" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };

  PipelineConfig c;
  if (auto v = kv.find("library_dir")) c.library_dir = resolve(*v);
  if (auto v = kv.find("target_card")) c.target_card = resolve(*v);
  if (auto v = kv.find("index_path")) c.index_path = resolve(*v);
  c.output_dir = resolve(kv.get_or("output_dir", "tabxfer-out"));
  c.k = parse_count(kv, "k", c.k);
  c.embedder = kv.get_or("embedder", c.embedder);
  if (c.embedder != "hashed-tf" && c.embedder != "remote") {
    raise(ErrorCode::InvalidConfig, origin + ": embedder must be hashed-tf or remote");
  }
  c.embed_dimension = parse_count(kv, "embed.dimension", c.embed_dimension);
  c.embed_idf = parse_bool(kv.get_or("embed.idf", "true"), "embed.idf");

  const std::string bandwidth = kv.get_or("kernel.bandwidth", "median");
  if (bandwidth == "median") {
    c.kernel = KernelConfig{};
  } else {
    c.kernel = KernelConfig::fixed(parse_double(bandwidth, "kernel.bandwidth"));
  }
  c.sinkhorn.epsilon = kv.get_double("sinkhorn.epsilon", c.sinkhorn.epsilon);
  c.sinkhorn.max_iter = static_cast<int>(kv.get_int("sinkhorn.max_iter", c.sinkhorn.max_iter));
  c.sinkhorn.tol = kv.get_double("sinkhorn.tol", c.sinkhorn.tol);

  c.mapping.name_weight = kv.get_double("mapping.name_weight", c.mapping.name_weight);
  c.mapping.profile_weight = kv.get_double("mapping.profile_weight", c.mapping.profile_weight);
  c.mapping.hint_weight = kv.get_double("mapping.hint_weight", c.mapping.hint_weight);
  c.mapping.hint_bonus = kv.get_double("mapping.hint_bonus", c.mapping.hint_bonus);
  c.mapping.affinity_floor = kv.get_double("mapping.affinity_floor", c.mapping.affinity_floor);
  c.mapping.max_perturbations = parse_count(kv, "mapping.max_perturbations", c.mapping.max_perturbations);
  c.mapping.perturbation_margin = kv.get_double("mapping.perturbation_margin", c.mapping.perturbation_margin);
  c.mapping.fit_quantiles = parse_bool(kv.get_or("mapping.quantiles", "true"), "mapping.quantiles");
  c.sample_cap = parse_count(kv, "mapping.sample_cap", c.sample_cap);

  c.transfer.alpha = kv.get_double("transfer.alpha", c.transfer.alpha);
  c.transfer.learning_rate = kv.get_double("transfer.learning_rate", c.transfer.learning_rate);
  const std::string batch = kv.get_or("transfer.batch_size", "auto");
  c.transfer.batch_size = batch == "auto" ? 0 : static_cast<std::size_t>(parse_int(batch, "transfer.batch_size"));
  c.transfer.max_epochs = static_cast<int>(kv.get_int("transfer.max_epochs", c.transfer.max_epochs));
  c.transfer.patience = static_cast<int>(kv.get_int("transfer.patience", c.transfer.patience));
  c.transfer.learner = parse_learner_kind(kv.get_or("transfer.learner", "logistic"));
  c.transfer.hidden_width = parse_count(kv, "transfer.hidden_width", c.transfer.hidden_width);
  if (auto v = kv.find("sweep.grid")) {
    for (const auto& item : split_list(*v)) c.alpha_grid.push_back(parse_double(item, "sweep.grid"));
  }

  c.adapter = parse_adapter_kind(kv.get_or("adapter.kind", "stub"));
  c.remote.endpoint = kv.get_or("adapter.endpoint", "");
  c.remote.model = kv.get_or("adapter.model", "");
  c.remote.timeout_ms = static_cast<int>(kv.get_int("adapter.timeout_ms", c.remote.timeout_ms));
  c.remote.max_attempts = static_cast<int>(kv.get_int("adapter.max_attempts", c.remote.max_attempts));
  c.remote.backoff_base_ms = static_cast<int>(kv.get_int("adapter.backoff_ms", c.remote.backoff_base_ms));

  c.test_fraction = kv.get_double("split.test_fraction", c.test_fraction);
  c.val_fraction = kv.get_double("split.val_fraction", c.val_fraction);
  const long long seed = kv.get_int("seed", 0);
  if (seed < 0) raise(ErrorCode::InvalidConfig, origin + ": seed must not be negative");
  c.set_seed(static_cast<std::uint64_t>(seed));
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  const auto absolute = std::filesystem::absolute(path);
  return parse(read_file(absolute), absolute.parent_path(), absolute.string());
}

void PipelineConfig::apply_environment() {
  if (const char* v = std::getenv("TABXFER_ADAPTER_ENDPOINT"); v && *v) remote.endpoint = v;
  if (const char* v = std::getenv("TABXFER_ADAPTER_MODEL"); v && *v) remote.model = v;
  if (const char* v = std::getenv("TABXFER_SEED"); v && *v) {
    const long long s = parse_int(v, "TABXFER_SEED");
    if (s < 0) raise(ErrorCode::InvalidConfig, "TABXFER_SEED must not be negative");
    set_seed(static_cast<std::uint64_t>(s));
  }
}

void PipelineConfig::set_seed(std::uint64_t value) {
  seed = value;
  transfer.seed = value;
  mapping.seed = derive_seed(value, 5);
}

void PipelineConfig::validate() const {
  if (library_dir.empty()) raise(ErrorCode::InvalidConfig, "library_dir is not set");
  if (!std::filesystem::is_directory(library_dir)) {
    raise(ErrorCode::NotFound, "library directory " + library_dir.string() + " does not exist");
  }
  if (target_card.empty()) raise(ErrorCode::InvalidConfig, "target_card is not set");
  if (!std::filesystem::is_regular_file(target_card)) {
    raise(ErrorCode::NotFound, "target card " + target_card.string() + " does not exist");
  }
  if (!index_path.empty() && !std::filesystem::is_regular_file(index_path)) {
    raise(ErrorCode::NotFound, "index file " + index_path.string() + " does not exist");
  }
  if (k < 1) raise(ErrorCode::InvalidConfig, "k must be at least 1");
  if (embed_dimension < 64) raise(ErrorCode::InvalidConfig, "embed.dimension must be at least 64");
  if (sample_cap < 2) raise(ErrorCode::InvalidConfig, "mapping.sample_cap must be at least 2");
  if (!(sinkhorn.epsilon > 0.0) || sinkhorn.max_iter < 1 || !(sinkhorn.tol > 0.0)) {
    raise(ErrorCode::InvalidConfig, "sinkhorn settings must be positive");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0) || !(val_fraction > 0.0 && val_fraction < 1.0)) {
    raise(ErrorCode::InvalidConfig, "split fractions must lie in (0, 1)");
  }
  transfer.validate();
  for (double a : alpha_grid) {
    if (!(a >= 0.0 && a <= 1.0)) raise(ErrorCode::InvalidConfig, "sweep.grid values must lie in [0, 1]");
  }
  if (adapter == AdapterKind::Remote || embedder == "remote") remote.validate();
}

std::string PipelineConfig::snapshot() const {
  std::ostringstream os;
  os << "library_dir = " << library_dir.generic_string() << "\n";
  os << "target_card = " << target_card.generic_string() << "\n";
  if (!index_path.empty()) os << "index_path = " << index_path.generic_string() << "\n";
  os << "output_dir = " << output_dir.generic_string() << "\n";
  os << "k = " << k << "\n";
  os << "seed = " << seed << "\n";
  os << "embedder = " << embedder << "\n";
  os << "embed.dimension = " << embed_dimension << "\n";
  os << "embed.idf = " << (embed_idf ? "true" : "false") << "\n";
  os << "kernel.bandwidth = "
     << (kernel.bandwidth_mode == BandwidthMode::MedianHeuristic ? std::string("median") : format_double(kernel.gamma))
     << "\n";
  os << "sinkhorn.epsilon = " << format_double(sinkhorn.epsilon) << "\n";
  os << "sinkhorn.max_iter = " << sinkhorn.max_iter << "\n";
  os << "sinkhorn.tol = " << format_double(sinkhorn.tol) << "\n";
  os << "mapping.name_weight = " << format_double(mapping.name_weight) << "\n";
  os << "mapping.profile_weight = " << format_double(mapping.profile_weight) << "\n";
  os << "mapping.hint_weight = " << format_double(mapping.hint_weight) << "\n";
  os << "mapping.hint_bonus = " << format_double(mapping.hint_bonus) << "\n";
  os << "mapping.affinity_floor = " << format_double(mapping.affinity_floor) << "\n";
  os << "mapping.max_perturbations = " << mapping.max_perturbations << "\n";
  os << "mapping.perturbation_margin = " << format_double(mapping.perturbation_margin) << "\n";
  os << "mapping.quantiles = " << (mapping.fit_quantiles ? "true" : "false") << "\n";
  os << "mapping.sample_cap = " << sample_cap << "\n";
  os << "transfer.alpha = " << format_double(transfer.alpha) << "\n";
  os << "transfer.learning_rate = " << format_double(transfer.learning_rate) << "\n";
  os << "transfer.batch_size = " << (transfer.batch_size ? std::to_string(transfer.batch_size) : "auto") << "\n";
  os << "transfer.max_epochs = " << transfer.max_epochs << "\n";
  os << "transfer.patience = " << transfer.patience << "\n";
  os << "transfer.learner = " << to_string(transfer.learner) << "\n";
  os << "transfer.hidden_width = " << transfer.hidden_width << "\n";
  if (!alpha_grid.empty()) os << "sweep.grid = " << join_doubles(alpha_grid) << "\n";
  os << "adapter.kind = " << to_string(adapter) << "\n";
  if (!remote.endpoint.empty()) os << "adapter.endpoint = " << remote.endpoint << "\n";
  if (!remote.model.empty()) os << "adapter.model = " << remote.model << "\n";
  os << "adapter.timeout_ms = " << remote.timeout_ms << "\n";
  os << "adapter.max_attempts = " << remote.max_attempts << "\n";
  os << "adapter.backoff_ms = " << remote.backoff_base_ms << "\n";
  os << "split.test_fraction = " << format_double(test_fraction) << "\n";
  os << "split.val_fraction = " << format_double(val_fraction) << "\n";
  return os.str();
}

TargetSplits make_target_splits(const LabeledTable& target, double test_fraction, double val_fraction,
                                std::uint64_t seed) {
  TargetSplits s;
  const HoldoutSplit outer = split_holdout(target, test_fraction, derive_seed(seed, 7));
  const HoldoutSplit inner = split_holdout(outer.train, val_fraction, derive_seed(seed, 8));
  s.test = outer.holdout;
  s.train = inner.train;
  s.val = inner.holdout;
  s.reference = outer.train;
  s.stratification_fallback = outer.stratification_fallback || inner.stratification_fallback;
  return s;
}

std::unique_ptr<QueryGenerator> make_adapter(const PipelineConfig& config, Transcript* transcript) {
  if (config.adapter == AdapterKind::Remote) return std::make_unique<RemoteAdapter>(config.remote, transcript);
  return std::make_unique<StubAdapter>(transcript);
}

std::unique_ptr<Embedder> make_embedder(const PipelineConfig& config, const std::vector<DatasetCard>& library,
                                        Transcript* transcript) {
  if (config.embedder == "remote") {
    return std::make_unique<RemoteEmbedder>(config.remote, config.embed_dimension, transcript);
  }
  std::optional<Vocabulary> vocabulary;
  if (config.embed_idf) {
    std::vector<std::string> docs;
    for (const auto& card : library) docs.push_back(card_text(card));
    vocabulary = Vocabulary::build(docs);
  }
  return std::make_unique<HashedTfEmbedder>(config.embed_dimension, std::move(vocabulary));
}

CardIndex build_candidate_index(const PipelineConfig& config, const std::vector<DatasetCard>& library,
                                const DatasetCard& target, const Embedder& embedder) {
  if (config.index_path.empty()) {
    std::vector<DatasetCard> candidates;
    for (const auto& card : library) {
      if (card.id != target.id) candidates.push_back(card);
    }
    if (candidates.empty()) raise(ErrorCode::EmptyLibrary, "the library holds no card besides the target");
    return CardIndex::build(candidates, embedder);
  }
  const CardIndex loaded = CardIndex::load(config.index_path);
  CardIndex filtered(loaded.dimension(), loaded.embedder_tag());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (loaded.ids()[i] != target.id) filtered.add(loaded.ids()[i], loaded.vector(i));
  }
  filtered.set_vocabulary(loaded.vocabulary());
  if (filtered.size() == 0) raise(ErrorCode::EmptyLibrary, "the index holds no card besides the target");
  return filtered;
}

CandidateHarmonization harmonize_candidate(const DatasetCard& source_card, const LabeledTable& source_table,
                                           const DatasetCard& target_card, const LabeledTable& target_reference,
                                           const MappingHints& hints, const PipelineConfig& config) {
  const Schema source_schema = infer_schema(source_table, source_card);
  const Schema target_schema = infer_schema(target_reference, target_card);
  const TableView source{source_table, source_schema, source_card};
  const TableView target{target_reference, target_schema, target_card};

  MappingSearchOptions search = config.mapping;
  search.sample_cap = config.sample_cap;
  CandidateHarmonization out;
  out.mapping = search_feature_mapping(source, target, hints, config.kernel, search);
  out.classes = class_align(source, target, hints);

  HarmonizeOptions options;
  options.sample_cap = config.sample_cap;
  options.seed = config.mapping.seed;
  options.wasserstein.sinkhorn = config.sinkhorn;
  auto [table, report] = harmonize_dataset(source, target, out.mapping, out.classes, options);
  out.harmonized = std::move(table);
  out.report = std::move(report);
  return out;
}

std::optional<std::size_t> select_source(const std::vector<CandidateSummary>& candidates) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!c.harmonized) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = candidates[*best];
    if (c.pooled_wasserstein < b.pooled_wasserstein ||
        (c.pooled_wasserstein == b.pooled_wasserstein &&
         (c.retrieval_score > b.retrieval_score || (c.retrieval_score == b.retrieval_score && c.id < b.id)))) {
      best = i;
    }
  }
  return best;
}

TransferOutcome train_and_evaluate(const LabeledTable& harmonized, const TargetSplits& splits,
                                   const TransferConfig& config) {
  TransferOutcome out;
  out.alpha = config.alpha;
  TransferConfig baseline = config;
  baseline.alpha = 0.0;
  const LabeledTable no_source = harmonized.select_rows({});
  TrainResult base = train(no_source, splits.train, splits.val, baseline);
  TrainResult moved = train(harmonized, splits.train, splits.val, config);
  out.baseline_log = std::move(base.log);
  out.transfer_log = std::move(moved.log);
  out.baseline = evaluate(base.model, splits.test);
  out.transfer = evaluate(moved.model, splits.test);
  return out;
}

RunReport run_pipeline(const PipelineConfig& config) {
  try {
    config.validate();
  } catch (...) {
    rethrow_as_stage("config", "-");
  }
  RunReport report;
  report.config_snapshot = config.snapshot();
  std::filesystem::create_directories(config.output_dir);
  const std::filesystem::path transcript_path = config.output_dir / "adapter_transcript.txt";
  Transcript transcript(transcript_path);
  report.transcript_path = transcript_path.filename();
  report.adapter = to_string(config.adapter);

  // 1. library and index
  DatasetCard target_card;
  LabeledTable target_table;
  std::vector<DatasetCard> library;
  std::unique_ptr<Embedder> embedder;
  std::optional<CardIndex> index;
  try {
    std::tie(target_card, target_table) = load_dataset(config.target_card);
    library = load_library(config.library_dir);
    std::erase_if(library, [&](const DatasetCard& c) { return c.id == target_card.id; });
    if (library.empty() && config.index_path.empty()) {
      raise(ErrorCode::EmptyLibrary, "library " + config.library_dir.string() + " holds no card besides the target");
    }
    embedder = make_embedder(config, library, &transcript);
    index.emplace(build_candidate_index(config, library, target_card, *embedder));
  } catch (...) {
    rethrow_as_stage("index", "-");
  }
  report.target_id = target_card.id;

  // 2. query and retrieval
  std::unique_ptr<QueryGenerator> adapter = make_adapter(config, &transcript);
  StubAdapter stub(&transcript);
  try {
    try {
      report.query = build_query(target_card, *adapter);
    } catch (const AdapterFailure& e) {
      report.adapter_note = std::string("remote query failed, stub used: ") + e.what();
      report.query = build_query(target_card, stub);
    }
    const HashedTfEmbedder hashed = index_embedder(*index);
    const Embedder& query_embedder = config.embedder == "remote" ? *embedder : static_cast<const Embedder&>(hashed);
    report.ranking = index->query_topk(query_embedder.embed(report.query), config.k);
  } catch (...) {
    rethrow_as_stage("retrieve", "-");
  }

  // 3. splits and per-candidate harmonization
  TargetSplits splits;
  try {
    splits = make_target_splits(target_table, config.test_fraction, config.val_fraction, config.seed);
  } catch (...) {
    rethrow_as_stage("split", target_card.id);
  }
  report.train_rows = splits.train.rows();
  report.val_rows = splits.val.rows();
  report.test_rows = splits.test.rows();

  std::map<std::string, const DatasetCard*> by_id;
  for (const auto& card : library) by_id[card.id] = &card;

  const std::size_t n = report.ranking.ranked.size();
  std::vector<std::optional<CandidateHarmonization>> results(n);
  std::vector<std::string> notes(n);
  report.candidates.resize(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const RankedCard& ranked = report.ranking.ranked[idx];
    CandidateSummary& summary = report.candidates[idx];
    summary.id = ranked.id;
    summary.retrieval_score = ranked.score;
    try {
      const auto it = by_id.find(ranked.id);
      if (it == by_id.end()) raise(ErrorCode::NotFound, "card '" + ranked.id + "' is indexed but not in the library");
      const DatasetCard& card = *it->second;
      const LabeledTable table = load_table(card);
      MappingHints hints;
      try {
        hints = adapter->mapping_hints(card, target_card);
      } catch (const AdapterFailure& e) {
        notes[idx] = "remote hints for " + card.id + " failed, stub used: " + e.what();
        hints = stub.mapping_hints(card, target_card);
      }
      CandidateHarmonization h = harmonize_candidate(card, table, target_card, splits.reference, hints, config);
      summary.harmonized = true;
      summary.pooled_wasserstein = h.report.pooled_wasserstein;
      summary.kernel_distance_before = h.report.kernel_distance_before;
      summary.kernel_distance_after = h.report.kernel_distance_after;
      summary.report = serialize_report(h.report);
      results[idx] = std::move(h);
    } catch (const Error& e) {
      summary.error = std::string(error_code_name(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
      summary.error = std::string("Io: ") + e.what();
    }
  }
  for (const auto& note : notes) {
    if (note.empty()) continue;
    report.adapter_note += (report.adapter_note.empty() ? "" : "; ") + note;
  }

  // 4. selection
  const auto chosen = select_source(report.candidates);
  if (!chosen) {
    std::string detail;
    for (const auto& c : report.candidates) detail += " [" + c.id + " " + c.error + "]";
    throw StageError(ErrorCode::NoViableCandidate, "select", "-", "no candidate could be harmonized:" + detail);
  }
  const CandidateHarmonization& picked = *results[*chosen];
  report.chosen_source = report.candidates[*chosen].id;
  report.chosen_mapping = serialize_mapping(picked.mapping, picked.classes);

  // 5 and 6. baseline and transfer with identical seeds, evaluated on the test split
  try {
    TransferConfig tc = config.transfer;
    if (!config.alpha_grid.empty()) {
      report.sweep = alpha_sweep(picked.harmonized, splits.train, splits.val, config.alpha_grid, tc);
      tc.alpha = report.sweep->best_alpha;
    }
    TransferOutcome outcome = train_and_evaluate(picked.harmonized, splits, tc);
    report.alpha = outcome.alpha;
    report.baseline_log = std::move(outcome.baseline_log);
    report.transfer_log = std::move(outcome.transfer_log);
    report.baseline = std::move(outcome.baseline);
    report.transfer = std::move(outcome.transfer);
  } catch (...) {
    rethrow_as_stage("transfer", report.chosen_source);
  }

  // 7. artifacts
  try {
    write_file(config.output_dir / "run_report.txt", render_run_report(report, utc_now()));
    write_file(config.output_dir / "summary.kv", render_summary(report));
    for (std::size_t i = 0; i < n; ++i) {
      if (!results[i]) continue;
      const std::string& id = report.candidates[i].id;
      write_file(config.output_dir / "mappings" / (id + ".mapping"),
                 serialize_mapping(results[i]->mapping, results[i]->classes));
      write_file(config.output_dir / "harmonization" / (id + ".txt"), report.candidates[i].report);
    }
  } catch (...) {
    rethrow_as_stage("report", "-");
  }
  return report;
}

std::string render_run_report(const RunReport& r, const std::string& generated_at) {
  std::ostringstream os;
  os << "# tabxfer run report\n";
  os << "generated_at = " << generated_at << "\n";
  os << "target = " << r.target_id << "\n";
  os << "adapter = " << r.adapter << "\n";
  if (!r.adapter_note.empty()) os << "adapter_note = " << r.adapter_note << "\n";
  os << "adapter_transcript = " << r.transcript_path.generic_string() << "\n";
  os << "query = " << r.query << "\n";

  os << "\n# retrieval ranking\n";
  for (std::size_t i = 0; i < r.ranking.ranked.size(); ++i) {
    os << "rank." << (i + 1) << " = " << r.ranking.ranked[i].id << " | " << format_double(r.ranking.ranked[i].score)
       << "\n";
  }

  os << "\n# candidates\n";
  for (const auto& c : r.candidates) {
    const std::string p = "candidate." + c.id + ".";
    os << p << "retrieval_score = " << format_double(c.retrieval_score) << "\n";
    os << p << "status = " << (c.harmonized ? "harmonized" : "failed") << "\n";
    if (!c.harmonized) {
      os << p << "error = " << c.error << "\n";
      continue;
    }
    os << p << "pooled_wasserstein = " << format_double(c.pooled_wasserstein) << "\n";
    os << prefix_lines(c.report, p + "report.");
  }

  os << "\n# selection\n";
  os << "selection_rule = " << r.selection_rule << "\n";
  os << "chosen_source = " << r.chosen_source << "\n";
  os << prefix_lines(r.chosen_mapping, "mapping.");

  os << "\n# target split\n";
  os << "split.train_rows = " << r.train_rows << "\n";
  os << "split.val_rows = " << r.val_rows << "\n";
  os << "split.test_rows = " << r.test_rows << "\n";

  os << "\n# transfer\n";
  os << "alpha = " << format_double(r.alpha) << "\n";
  if (r.sweep) {
    os << "sweep.best_alpha = " << format_double(r.sweep->best_alpha) << "\n";
    for (std::size_t i = 0; i < r.sweep->entries.size(); ++i) {
      const auto& e = r.sweep->entries[i];
      os << "sweep." << i << " = alpha " << format_double(e.alpha) << " | val_macro_f1 "
         << format_double(e.validation.macro_f1) << " | val_accuracy " << format_double(e.validation.accuracy)
         << "\n";
    }
  }
  os << "\n# held-out metrics: target-only baseline vs transfer\n";
  os << serialize_metrics(r.baseline, "baseline");
  os << serialize_metrics(r.transfer, "transfer");
  os << "gain.accuracy = " << format_double(r.transfer.accuracy - r.baseline.accuracy) << "\n";
  os << "gain.macro_f1 = " << format_double(r.transfer.macro_f1 - r.baseline.macro_f1) << "\n";

  os << "\n# training logs\n";
  os << prefix_lines(serialize_log(r.baseline_log), "baseline_log.");
  os << prefix_lines(serialize_log(r.transfer_log), "transfer_log.");

  os << "\n# configuration\n";
  os << prefix_lines(r.config_snapshot, "config.");
  return os.str();
}

std::string render_summary(const RunReport& r) {
  std::ostringstream os;
  os << "target = " << r.target_id << "\n";
  os << "chosen_source = " << r.chosen_source << "\n";
  os << "candidates = " << r.candidates.size() << "\n";
  os << "alpha = " << format_double(r.alpha) << "\n";
  for (const auto& [prefix, m] : {std::pair{"baseline", &r.baseline}, std::pair{"transfer", &r.transfer}}) {
    os << prefix << ".accuracy = " << format_double(m->accuracy) << "\n";
    os << prefix << ".macro_precision = " << format_double(m->macro_precision) << "\n";
    os << prefix << ".macro_recall = " << format_double(m->macro_recall) << "\n";
    os << prefix << ".macro_f1 = " << format_double(m->macro_f1) << "\n";
  }
  os << "gain.accuracy = " << format_double(r.transfer.accuracy - r.baseline.accuracy) << "\n";
  os << "gain.macro_f1 = " << format_double(r.transfer.macro_f1 - r.baseline.macro_f1) << "\n";
  return os.str();
}

std::string render_transfer_outcome(const TransferOutcome& o) {
  std::ostringstream os;
  os << "alpha = " << format_double(o.alpha) << "\n";
  os << serialize_metrics(o.baseline, "baseline");
  os << serialize_metrics(o.transfer, "transfer");
  os << "gain.accuracy = " << format_double(o.transfer.accuracy - o.baseline.accuracy) << "\n";
  os << "gain.macro_f1 = " << format_double(o.transfer.macro_f1 - o.baseline.macro_f1) << "\n";
  os << prefix_lines(serialize_log(o.baseline_log), "baseline_log.");
  os << prefix_lines(serialize_log(o.transfer_log), "transfer_log.");
  return os.str();
}

}  // namespace tabxfer
