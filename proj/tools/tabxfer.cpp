#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tabxfer/catalog.hpp"
#include "tabxfer/embed.hpp"
#include "tabxfer/error.hpp"
#include "tabxfer/harmonize.hpp"
#include "tabxfer/kv.hpp"
#include "tabxfer/llm_adapter.hpp"
#include "tabxfer/pipeline.hpp"
#include "tabxfer/transfer.hpp"

namespace fs = std::filesystem;
using namespace tabxfer;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string library;
  std::string target;
  std::string index;
  std::optional<std::size_t> k;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Pipeline config file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Global seed, overrides config and TABXFER_SEED");
  cmd->add_option("--out", f.out, "Output directory, overrides output_dir");
  cmd->add_option("--library", f.library, "Directory of dataset cards, overrides library_dir");
  cmd->add_option("--target", f.target, "Target card file, overrides target_card");
  cmd->add_option("--index", f.index, "Prebuilt card index, overrides index_path");
  cmd->add_option("-k", f.k, "Number of candidates to retrieve");
}

PipelineConfig resolve_config(const CommonFlags& f) {
  PipelineConfig c = f.config.empty() ? PipelineConfig::parse("", fs::current_path(), "<defaults>")
                                      : PipelineConfig::load(f.config);
  c.apply_environment();
  if (f.seed) c.set_seed(*f.seed);
  if (!f.out.empty()) c.output_dir = fs::absolute(f.out);
  if (!f.library.empty()) c.library_dir = fs::absolute(f.library);
  if (!f.target.empty()) c.target_card = fs::absolute(f.target);
  if (!f.index.empty()) c.index_path = fs::absolute(f.index);
  if (f.k) c.k = *f.k;
  return c;
}

// Target table, its splits, and the library without the target.
struct TargetContext {
  DatasetCard card;
  LabeledTable table;
  TargetSplits splits;
  std::vector<DatasetCard> library;
};

TargetContext load_target_context(const PipelineConfig& c) {
  TargetContext t;
  std::tie(t.card, t.table) = load_dataset(c.target_card);
  t.library = load_library(c.library_dir);
  std::erase_if(t.library, [&](const DatasetCard& card) { return card.id == t.card.id; });
  t.splits = make_target_splits(t.table, c.test_fraction, c.val_fraction, c.seed);
  return t;
}

const DatasetCard& find_card(const std::vector<DatasetCard>& library, const std::string& id) {
  for (const auto& card : library) {
    if (card.id == id) return card;
  }
  raise(ErrorCode::NotFound, "no card with id '" + id + "' in the library");
}

// Rebuilds the harmonized source table from a mapping file exactly as `run`
// does for its chosen candidate.
LabeledTable replay_mapping(const PipelineConfig& c, const TargetContext& t, const fs::path& mapping_path) {
  auto [mapping, classes] = parse_mapping(read_file(mapping_path), mapping_path.string());
  if (mapping.target_card != t.card.id) {
    raise(ErrorCode::InvalidArgument, "mapping targets '" + mapping.target_card + "' but the target card is '" +
                                          t.card.id + "'");
  }
  const DatasetCard& source_card = find_card(t.library, mapping.source_card);
  const LabeledTable source_table = load_table(source_card);
  const Schema source_schema = infer_schema(source_table, source_card);
  const Schema target_schema = infer_schema(t.splits.reference, t.card);
  HarmonizeOptions options;
  options.sample_cap = c.sample_cap;
  options.seed = c.mapping.seed;
  options.wasserstein.sinkhorn = c.sinkhorn;
  return harmonize_dataset({source_table, source_schema, source_card}, {t.splits.reference, target_schema, t.card},
                           mapping, classes, options)
      .first;
}

void print_error(const Error& e, const std::string& stage) {
  std::string message = e.what();
  for (auto& ch : message) {
    if (ch == '\n') ch = ' ';
    if (ch == '"') ch = '\'';
  }
  const auto* staged = dynamic_cast<const StageError*>(&e);
  std::cerr << "error: code=" << error_code_name(e.code()) << " stage=" << (staged ? staged->stage() : stage)
            << " candidate=" << (staged && !staged->candidate().empty() ? staged->candidate() : "-")
            << " message=\"" << message << "\"\n";
}

int cmd_index(const CommonFlags& f) {
  PipelineConfig c = resolve_config(f);
  if (c.library_dir.empty()) raise(ErrorCode::InvalidConfig, "library_dir is not set");
  const auto library = load_library(c.library_dir);
  if (library.empty()) raise(ErrorCode::EmptyLibrary, "library " + c.library_dir.string() + " holds no cards");
  fs::create_directories(c.output_dir);
  Transcript transcript(c.output_dir / "adapter_transcript.txt");
  const auto embedder = make_embedder(c, library, &transcript);
  CardIndex index = CardIndex::build(library, *embedder);
  if (const auto* hashed = dynamic_cast<const HashedTfEmbedder*>(embedder.get())) {
    index.set_vocabulary(hashed->vocabulary());
  }
  const fs::path path = c.output_dir / "card_index.txt";
  index.save(path);
  std::cout << "indexed " << index.size() << " cards into " << path.string() << "\n";
  return 0;
}

int cmd_retrieve(const CommonFlags& f) {
  PipelineConfig c = resolve_config(f);
  c.validate();
  const auto [target, table] = load_dataset(c.target_card);
  auto library = load_library(c.library_dir);
  fs::create_directories(c.output_dir);
  Transcript transcript(c.output_dir / "adapter_transcript.txt");
  std::erase_if(library, [&](const DatasetCard& card) { return card.id == target.id; });
  const auto embedder = make_embedder(c, library, &transcript);
  const CardIndex index = build_candidate_index(c, library, target, *embedder);
  const auto adapter = make_adapter(c, &transcript);
  const std::string query = build_query(target, *adapter);
  const HashedTfEmbedder hashed = index_embedder(index);
  const Embedder& query_embedder = c.embedder == "remote" ? *embedder : static_cast<const Embedder&>(hashed);
  const RetrievalResult result = index.query_topk(query_embedder.embed(query), c.k);
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    std::cout << (i + 1) << "\t" << result.ranked[i].id << "\t" << format_double(result.ranked[i].score) << "\n";
  }
  return 0;
}

int cmd_harmonize(const CommonFlags& f, const std::string& source_id) {
  PipelineConfig c = resolve_config(f);
  c.validate();
  const TargetContext t = load_target_context(c);
  const DatasetCard& source_card = find_card(t.library, source_id);
  const LabeledTable source_table = load_table(source_card);
  fs::create_directories(c.output_dir);
  Transcript transcript(c.output_dir / "adapter_transcript.txt");
  const auto adapter = make_adapter(c, &transcript);
  const MappingHints hints = adapter->mapping_hints(source_card, t.card);
  const CandidateHarmonization h = harmonize_candidate(source_card, source_table, t.card, t.splits.reference, hints, c);
  const fs::path mapping_path = c.output_dir / "mappings" / (source_id + ".mapping");
  const fs::path report_path = c.output_dir / "harmonization" / (source_id + ".txt");
  write_file(mapping_path, serialize_mapping(h.mapping, h.classes));
  write_file(report_path, serialize_report(h.report));
  std::cout << serialize_report(h.report);
  std::cout << "mapping_file = " << mapping_path.string() << "\n";
  return 0;
}

int cmd_transfer(const CommonFlags& f, const std::string& mapping_path, std::optional<double> alpha) {
  PipelineConfig c = resolve_config(f);
  if (alpha) c.transfer.alpha = *alpha;
  c.validate();
  const TargetContext t = load_target_context(c);
  const LabeledTable harmonized = replay_mapping(c, t, mapping_path);
  const TransferOutcome outcome = train_and_evaluate(harmonized, t.splits, c.transfer);
  const std::string text = render_transfer_outcome(outcome);
  write_file(c.output_dir / "transfer.kv", text);
  std::cout << text;
  return 0;
}

int cmd_sweep(const CommonFlags& f, const std::string& mapping_path, std::vector<double> grid) {
  PipelineConfig c = resolve_config(f);
  if (!grid.empty()) c.alpha_grid = std::move(grid);
  if (c.alpha_grid.empty()) c.alpha_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  c.validate();
  const TargetContext t = load_target_context(c);
  const LabeledTable harmonized = replay_mapping(c, t, mapping_path);
  const SweepResult sweep = alpha_sweep(harmonized, t.splits.train, t.splits.val, c.alpha_grid, c.transfer);
  std::string text = "best_alpha = " + format_double(sweep.best_alpha) + "\n";
  for (std::size_t i = 0; i < sweep.entries.size(); ++i) {
    const auto& e = sweep.entries[i];
    text += "sweep." + std::to_string(i) + " = alpha " + format_double(e.alpha) + " | val_macro_f1 " +
            format_double(e.validation.macro_f1) + " | val_accuracy " + format_double(e.validation.accuracy) +
            " | best_epoch " + std::to_string(e.log.best_epoch) + "\n";
  }
  write_file(c.output_dir / "sweep.kv", text);
  std::cout << text;
  return 0;
}

int cmd_run(const CommonFlags& f) {
  const PipelineConfig c = resolve_config(f);
  const RunReport report = run_pipeline(c);
  std::cout << render_summary(report);
  std::cout << "report = " << (c.output_dir / "run_report.txt").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabxfer: retrieve a source dataset, harmonize it to a target table, and train with transfer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tabxfer 0.1.0");

  CommonFlags flags;
  std::string source_id;
  std::string mapping_path;
  std::optional<double> alpha;
  std::vector<double> grid;

  auto* index = app.add_subcommand("index", "Build the card index of a library");
  auto* retrieve = app.add_subcommand("retrieve", "Print the candidate ranking for the target card");
  auto* harmonize = app.add_subcommand("harmonize", "Harmonize one source to the target; writes report and mapping");
  auto* transfer = app.add_subcommand("transfer", "Train baseline and transfer models from a mapping file");
  auto* run = app.add_subcommand("run", "Full pipeline: retrieve, harmonize, select, train, evaluate");
  auto* sweep = app.add_subcommand("sweep", "Validation sweep of the source loss weight alpha");
  for (auto* cmd : {index, retrieve, harmonize, transfer, run, sweep}) add_common(cmd, flags);
  harmonize->add_option("--source", source_id, "Library card id of the source")->required();
  transfer->add_option("--mapping", mapping_path, "Mapping file written by `harmonize`")
      ->required()
      ->check(CLI::ExistingFile);
  transfer->add_option("--alpha", alpha, "Source loss weight, overrides transfer.alpha")
      ->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--mapping", mapping_path, "Mapping file written by `harmonize`")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--grid", grid, "Alpha values, overrides sweep.grid")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const CLI::App* failing = &app;
    for (auto* cmd : app.get_subcommands()) failing = cmd;
    std::cerr << failing->help();
    std::string message = e.what();
    for (auto& ch : message) {
      if (ch == '\n') ch = ' ';
      if (ch == '"') ch = '\'';
    }
    std::cerr << "error: code=InvalidArgument stage=cli candidate=- message=\"" << message << "\"\n";
    return 2;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string stage = chosen->get_name();
  try {
    if (chosen == index) return cmd_index(flags);
    if (chosen == retrieve) return cmd_retrieve(flags);
    if (chosen == harmonize) return cmd_harmonize(flags, source_id);
    if (chosen == transfer) return cmd_transfer(flags, mapping_path, alpha);
    if (chosen == sweep) return cmd_sweep(flags, mapping_path, grid);
    return cmd_run(flags);
  } catch (const Error& e) {
    print_error(e, stage);
  } catch (const fs::filesystem_error& e) {
    print_error(Error(ErrorCode::Io, e.what()), stage);
  } catch (const std::exception& e) {
    print_error(Error(ErrorCode::Io, e.what()), stage);
  }
  return 1;
}
