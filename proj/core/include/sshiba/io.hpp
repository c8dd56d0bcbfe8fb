#ifndef SSHIBA_IO_HPP
#define SSHIBA_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "sshiba/model.hpp"

namespace sshiba {

enum class ViewRole : std::uint8_t { kInput = 0, kTarget = 1 };

struct ManifestEntry {
  std::string name;
  std::filesystem::path path;  // relative paths resolve against the manifest
  ViewKind kind = ViewKind::kReal;
  ViewRole role = ViewRole::kInput;
  // Required for categorical views; inferred from the CSV width otherwise
  // (0 = infer).
  std::size_t dim = 0;
  bool header = false;
  bool feature_selection = true;
  // Additional missing token besides the empty field and "NaN".
  std::string missing_token = "NaN";
};

// Key-value manifest:
//
//   # comment
//   [view]
//   name = labels
//   path = labels.csv
//   kind = categorical
//   dim = 3
//   role = target
//   header = false
//   feature_selection = true
//   missing = NA
//
// Every [view] section starts a new entry, in file order.
struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> views;
  // Require every view to have the same row count (always true for fits).
  bool check_sample_count = true;

  static DatasetManifest parse(const std::filesystem::path& path);
  std::string serialize() const;
};

struct Dataset {
  ObservationSet data;
  std::vector<ViewRole> roles;
};

// Throws Error(kParseError) with row/column for malformed CSV,
// Error(kDomainError) for labels outside the view domain and
// Error(kShapeMismatch) for inconsistent widths or sample counts.
Dataset load_dataset(const DatasetManifest& manifest);
Dataset load_dataset(const std::filesystem::path& manifest_path);

// Writes one CSV per view plus `manifest.ini` into `dir`. Values are written
// with 17 significant digits; masked cells are written as empty fields.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

// Plain numeric CSV helpers. Blank lines are skipped, except in a
// single-column file where they are missing cells.
Matrix read_csv(const std::filesystem::path& path, bool header, Mask* missing = nullptr,
                const std::string& missing_token = "NaN");
void write_csv(const std::filesystem::path& path, const Matrix& values,
               const std::vector<std::string>& header = {});
std::string format_double(double value);

// Binary container: "SSHIBA1" followed by named records.
void save_model(const ModelState& state, const std::filesystem::path& path);
ModelState load_model(const std::filesystem::path& path);

}  // namespace sshiba

#endif  // SSHIBA_IO_HPP
