#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sshiba/error.hpp"
#include "sshiba/io.hpp"

namespace sshiba {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool parse_bool(const std::string& value, std::size_t line) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  raise(ErrorKind::kParseError,
        "manifest line " + std::to_string(line) + ": expected a boolean, got '" + value + "'");
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

DatasetManifest DatasetManifest::parse(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kParseError, "cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.base_dir = path.parent_path();
  std::string raw;
  std::size_t line_no = 0;
  ManifestEntry* current = nullptr;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line == "[view]") {
      manifest.views.emplace_back();
      current = &manifest.views.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raise(ErrorKind::kParseError, "manifest line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (current == nullptr) {
      if (key == "check_sample_count") {
        manifest.check_sample_count = parse_bool(value, line_no);
        continue;
      }
      raise(ErrorKind::kParseError,
            "manifest line " + std::to_string(line_no) + ": key '" + key + "' outside a [view] section");
    }
    if (key == "name") {
      current->name = value;
    } else if (key == "path") {
      current->path = value;
    } else if (key == "kind") {
      try {
        current->kind = parse_view_kind(value);
      } catch (const Error&) {
        raise(ErrorKind::kParseError,
              "manifest line " + std::to_string(line_no) + ": unknown kind '" + value + "'");
      }
    } else if (key == "role") {
      if (value == "input") {
        current->role = ViewRole::kInput;
      } else if (value == "target") {
        current->role = ViewRole::kTarget;
      } else {
        raise(ErrorKind::kParseError,
              "manifest line " + std::to_string(line_no) + ": unknown role '" + value + "'");
      }
    } else if (key == "dim") {
      std::size_t dim = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), dim);
      if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
        raise(ErrorKind::kParseError,
              "manifest line " + std::to_string(line_no) + ": invalid dim '" + value + "'");
      }
      current->dim = dim;
    } else if (key == "header") {
      current->header = parse_bool(value, line_no);
    } else if (key == "feature_selection") {
      current->feature_selection = parse_bool(value, line_no);
    } else if (key == "missing") {
      current->missing_token = value;
    } else {
      raise(ErrorKind::kParseError,
            "manifest line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (manifest.views.empty()) raise(ErrorKind::kParseError, "manifest declares no views");
  for (std::size_t m = 0; m < manifest.views.size(); ++m) {
    ManifestEntry& e = manifest.views[m];
    if (e.path.empty()) raise(ErrorKind::kParseError, "view " + std::to_string(m) + " has no path");
    if (e.name.empty()) e.name = e.path.stem().string();
    if (e.kind == ViewKind::kCategorical && e.dim < 2) {
      raise(ErrorKind::kParseError, "categorical view '" + e.name + "' needs dim >= 2");
    }
  }
  return manifest;
}

std::string DatasetManifest::serialize() const {
  std::ostringstream out;
  if (!check_sample_count) out << "check_sample_count = false\n";
  for (const ManifestEntry& e : views) {
    out << "[view]\n"
        << "name = " << e.name << "\n"
        << "path = " << e.path.generic_string() << "\n"
        << "kind = " << to_string(e.kind) << "\n"
        << "dim = " << e.dim << "\n"
        << "role = " << (e.role == ViewRole::kTarget ? "target" : "input") << "\n"
        << "header = " << (e.header ? "true" : "false") << "\n"
        << "feature_selection = " << (e.feature_selection ? "true" : "false") << "\n"
        << "missing = " << e.missing_token << "\n";
  }
  return out.str();
}

Matrix read_csv(const std::filesystem::path& path, bool header, Mask* missing,
                const std::string& missing_token) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::kParseError, "cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> holes;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    // A blank line is one missing cell in a single-column file.
    if (trim(line).empty() && (rows.empty() || width != 1)) continue;
    const auto fields = split_fields(line);
    if (rows.empty()) {
      width = fields.size();
    } else if (fields.size() != width) {
      raise(ErrorKind::kShapeMismatch, path.filename().string() + " row " + std::to_string(line_no) +
                                           ": expected " + std::to_string(width) + " columns, got " +
                                           std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    std::vector<bool> hole(fields.size(), false);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      if (f.empty() || f == "NaN" || f == "nan" || f == missing_token) {
        row[c] = 0.0;
        hole[c] = true;
        continue;
      }
      const char* begin = f.data();
      if (*begin == '+') ++begin;
      const auto res = std::from_chars(begin, f.data() + f.size(), row[c]);
      if (res.ec != std::errc{} || res.ptr != f.data() + f.size() || !std::isfinite(row[c])) {
        raise(ErrorKind::kParseError, path.filename().string() + " row " + std::to_string(line_no) +
                                          " column " + std::to_string(c + 1) + ": cannot parse '" +
                                          f + "'");
      }
    }
    rows.push_back(std::move(row));
    holes.push_back(std::move(hole));
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  if (missing != nullptr) missing->resize(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (missing != nullptr) (*missing)(i, j) = holes[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Matrix& values,
               const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::kParseError, "cannot write " + path.string());
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << "\n";
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      if (!std::isnan(values(i, j))) out << format_double(values(i, j));
    }
    out << "\n";
  }
}

Dataset load_dataset(const DatasetManifest& manifest) {
  Dataset out;
  for (const ManifestEntry& e : manifest.views) {
    const auto path = e.path.is_absolute() ? e.path : manifest.base_dir / e.path;
    ViewData view;
    view.spec.name = e.name;
    view.spec.kind = e.kind;
    view.spec.feature_selection = e.feature_selection;
    view.values = read_csv(path, e.header, &view.missing, e.missing_token);
    const std::string where = "view '" + e.name + "'";
    switch (e.kind) {
      case ViewKind::kReal:
      case ViewKind::kBinary:
        if (e.dim != 0 && static_cast<Eigen::Index>(e.dim) != view.values.cols()) {
          raise(ErrorKind::kShapeMismatch, where + ": manifest dim " + std::to_string(e.dim) +
                                               " but file has " + std::to_string(view.values.cols()) +
                                               " columns");
        }
        view.spec.dim = static_cast<std::size_t>(view.values.cols());
        break;
      case ViewKind::kCategorical:
        if (view.values.cols() != 1) {
          raise(ErrorKind::kShapeMismatch, where + ": categorical file must have one column");
        }
        view.spec.dim = e.dim;
        break;
    }
    for (Eigen::Index i = 0; i < view.values.rows(); ++i) {
      for (Eigen::Index j = 0; j < view.values.cols(); ++j) {
        if (view.missing(i, j)) continue;
        const double v = view.values(i, j);
        const std::string cell = " row " + std::to_string(i + 1) + " column " + std::to_string(j + 1);
        if (e.kind == ViewKind::kBinary && v != 0.0 && v != 1.0) {
          raise(ErrorKind::kDomainError, where + cell + ": binary value " + format_double(v));
        }
        if (e.kind == ViewKind::kCategorical &&
            (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(e.dim))) {
          raise(ErrorKind::kDomainError, where + cell + ": label " + format_double(v) +
                                             " outside 0.." + std::to_string(e.dim - 1));
        }
      }
    }
    out.data.views.push_back(std::move(view));
    out.roles.push_back(e.role);
  }
  out.data.n_samples = static_cast<std::size_t>(out.data.views.front().values.rows());
  if (manifest.check_sample_count) {
    for (const ViewData& v : out.data.views) {
      if (static_cast<std::size_t>(v.values.rows()) != out.data.n_samples) {
        raise(ErrorKind::kShapeMismatch, "view '" + v.spec.name + "' has " +
                                             std::to_string(v.values.rows()) + " rows, expected " +
                                             std::to_string(out.data.n_samples));
      }
    }
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  return load_dataset(DatasetManifest::parse(manifest_path));
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  for (std::size_t m = 0; m < dataset.data.views.size(); ++m) {
    const ViewData& v = dataset.data.views[m];
    Matrix values = v.values;
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        if (v.missing(i, j)) values(i, j) = std::nan("");
      }
    }
    ManifestEntry e;
    e.name = v.spec.name.empty() ? "view" + std::to_string(m) : v.spec.name;
    e.path = e.name + ".csv";
    e.kind = v.spec.kind;
    e.dim = v.spec.dim;
    e.role = m < dataset.roles.size() ? dataset.roles[m] : ViewRole::kInput;
    e.feature_selection = v.spec.feature_selection;
    write_csv(dir / e.path, values);
    manifest.views.push_back(std::move(e));
  }
  std::ofstream out(dir / "manifest.ini", std::ios::binary);
  out << manifest.serialize();
}

}  // namespace sshiba
