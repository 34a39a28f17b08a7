#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tabxfer/catalog.hpp"
#include "tabxfer/matrix.hpp"
#include "tabxfer/random.hpp"

namespace tabxfer::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

// Writes `<id>.card` and `<id>.csv` into dir and returns the card path.
std::filesystem::path write_card(const std::filesystem::path& dir, const std::string& id,
                                 const std::string& description, const std::vector<std::string>& features,
                                 const std::string& csv_body, const std::string& classes = "0, 1");

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0);

// Runs a shell command and returns its exit status; stdout and stderr are
// captured into the two strings.
int run_command(const std::string& command, std::string* out = nullptr, std::string* err = nullptr);

std::string cli_path();

}  // namespace tabxfer::test
