#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "tabxfer/error.hpp"
#include "tabxfer/kv.hpp"
#include "tabxfer/synthetic.hpp"

namespace fs = std::filesystem;
using namespace tabxfer;

// Writes seeded example libraries for trying the CLI without real data.
int main(int argc, char** argv) {
  CLI::App app{"tabxfer_synth: write seeded synthetic dataset libraries"};
  app.require_subcommand(1);

  std::string out;
  std::uint64_t seed = 0;
  std::size_t distractors = 9;

  auto* demo = app.add_subcommand("demo", "Target, its shifted twin and unrelated distractors, plus run.cfg");
  demo->add_option("--out", out, "Directory to write into")->required();
  demo->add_option("--seed", seed, "Generator seed");
  demo->add_option("--distractors", distractors, "Number of distractor datasets")->check(CLI::Range(0, 21));

  auto* bcw = app.add_subcommand("bcw", "Breast-cancer-shaped fixture with 30 real column names");
  bcw->add_option("--out", out, "Directory to write into")->required();
  bcw->add_option("--seed", seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path dir = fs::absolute(out);
    fs::create_directories(dir);
    if (demo->parsed()) {
      const synthetic::DemoLibrary lib = synthetic::write_demo_library(dir, seed, distractors);
      write_file(dir / "run.cfg", "# demo pipeline config\n"
                                  "library_dir = .\n"
                                  "target_card = " + lib.target_card.filename().string() + "\n"
                                  "output_dir = out\n"
                                  "seed = " + std::to_string(seed) + "\n");
      std::cout << "target_card = " << lib.target_card.string() << "\n";
      std::cout << "twin = " << lib.twin_id << "\n";
      std::cout << "config = " << (dir / "run.cfg").string() << "\n";
    } else {
      auto [card, table] = synthetic::make_breast_cancer_fixture(seed);
      synthetic::write_dataset(dir, card, table);
      std::cout << "card = " << (dir / (card.id + ".card")).string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: code=" << error_code_name(e.code()) << " stage=synth candidate=- message=\"" << e.what()
              << "\"\n";
    return 1;
  }
  return 0;
}
