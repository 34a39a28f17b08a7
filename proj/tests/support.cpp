#include "support.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "tabxfer/kv.hpp"

namespace tabxfer::test {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  path_ = fs::temp_directory_path() /
          ("tabxfer-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, text); }

fs::path write_card(const fs::path& dir, const std::string& id, const std::string& description,
                    const std::vector<std::string>& features, const std::string& csv_body,
                    const std::string& classes) {
  std::string list;
  for (std::size_t i = 0; i < features.size(); ++i) list += (i ? ", " : "") + features[i];
  const fs::path card = dir / (id + ".card");
  write_text(card, "id = " + id + "\nname = " + id + "\ndescription = " + description + "\nfeatures = " + list +
                       "\ntarget = label\nclasses = " + classes + "\ndata_path = " + id + ".csv\n");
  write_text(dir / (id + ".csv"), csv_body);
  return card;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

int run_command(const std::string& command, std::string* out, std::string* err) {
  static int counter = 0;
  const fs::path base = fs::temp_directory_path() /
                        ("tabxfer-cmd-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  const std::string full = command + " >" + base.string() + ".out 2>" + base.string() + ".err";
  const int status = std::system(full.c_str());
  if (out) *out = read_file(base.string() + ".out");
  if (err) *err = read_file(base.string() + ".err");
  fs::remove(base.string() + ".out");
  fs::remove(base.string() + ".err");
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_path() { return TABXFER_CLI_PATH; }

}  // namespace tabxfer::test
