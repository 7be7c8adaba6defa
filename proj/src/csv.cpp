#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "bucketperm/dataset.hpp"
#include "bucketperm/error.hpp"

namespace bucketperm {
namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& text, double& out) {
  std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

bool parse_int(const std::string& text, int& out) {
  std::string t = trim(text);
  if (t.empty()) return false;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s, char delim) {
  if (s.find(delim) == std::string::npos && s.find('"') == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::filesystem::path& path) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::MissingColumn, name + " in " + path.string());
  return static_cast<std::size_t>(it - header.begin());
}

std::map<std::string, int> read_label_table(const std::filesystem::path& path,
                                            const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!read_line(in, line)) throw Error(ErrorCode::MissingColumn, "empty label table");
  auto header = split_line(line, schema.delimiter);
  std::size_t bucket_col = column_index(header, schema.bucket_id_column, path);
  std::size_t label_col = column_index(header, schema.label_column, path);
  std::map<std::string, int> labels;
  std::size_t row = 1;
  while (read_line(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(row) + " has " +
                                                 std::to_string(cells.size()) + " cells");
    }
    int label = 0;
    if (!parse_int(cells[label_col], label)) {
      throw Error(ErrorCode::NonNumericCell,
                  "(" + std::to_string(row) + "," + schema.label_column + ")");
    }
    auto [it, inserted] = labels.emplace(cells[bucket_col], label);
    if (!inserted && it->second != label) throw Error(ErrorCode::LabelDisagreement, cells[bucket_col]);
  }
  return labels;
}

}  // namespace

BucketedDataset load_csv(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  std::string line;
  if (!read_line(in, line)) throw Error(ErrorCode::MissingColumn, "empty file " + path.string());
  auto header = split_line(line, schema.delimiter);
  for (auto& h : header) h = trim(h);

  const bool per_unit_labels = schema.label_source == DatasetSchema::LabelSource::unit_column;
  std::size_t bucket_col = column_index(header, schema.bucket_id_column, path);
  std::optional<std::size_t> unit_col;
  if (!schema.unit_id_column.empty()) unit_col = column_index(header, schema.unit_id_column, path);
  std::optional<std::size_t> label_col;
  if (per_unit_labels) label_col = column_index(header, schema.label_column, path);

  std::vector<std::size_t> feature_cols;
  if (schema.feature_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == bucket_col || c == unit_col || c == label_col) continue;
      feature_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      feature_cols.push_back(column_index(header, name, path));
    }
  }

  BucketedDataset ds;
  for (std::size_t c : feature_cols) ds.feature_names.push_back(header[c]);

  std::unordered_map<std::string, std::size_t> bucket_index;
  std::vector<int> raw_bucket_label;
  std::vector<double> values;
  std::size_t row = 1;
  while (read_line(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto cells = split_line(line, schema.delimiter);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::NonNumericCell, "(" + std::to_string(row) + ") has " +
                                                 std::to_string(cells.size()) + " cells, expected " +
                                                 std::to_string(header.size()));
    }
    const std::string& bucket_id = cells[bucket_col];
    auto [it, inserted] = bucket_index.emplace(bucket_id, ds.bucket_ids.size());
    if (inserted) {
      ds.bucket_ids.push_back(bucket_id);
      raw_bucket_label.push_back(0);
    }
    const std::size_t b = it->second;

    if (per_unit_labels) {
      int label = 0;
      if (!parse_int(cells[*label_col], label)) {
        throw Error(ErrorCode::NonNumericCell,
                    "(" + std::to_string(row) + "," + header[*label_col] + ")");
      }
      if (inserted) {
        raw_bucket_label[b] = label;
      } else if (raw_bucket_label[b] != label) {
        throw Error(ErrorCode::LabelDisagreement, bucket_id);
      }
    }

    for (std::size_t c : feature_cols) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw Error(ErrorCode::NonNumericCell, "(" + std::to_string(row) + "," + header[c] + ")");
      }
      values.push_back(v);
    }
    ds.unit_ids.push_back(unit_col ? cells[*unit_col] : "row" + std::to_string(ds.unit_ids.size()));
    ds.bucket_of.push_back(b);
  }

  if (!per_unit_labels) {
    auto table = read_label_table(schema.bucket_label_table, schema);
    for (const auto& [bucket_id, label] : table) {
      auto it = bucket_index.find(bucket_id);
      if (it == bucket_index.end()) throw Error(ErrorCode::EmptyBucket, bucket_id);
      raw_bucket_label[it->second] = label;
    }
    for (std::size_t b = 0; b < ds.bucket_ids.size(); ++b) {
      if (!table.count(ds.bucket_ids[b])) {
        throw Error(ErrorCode::UncoveredBucket, ds.bucket_ids[b] + " has no label in " +
                                                    schema.bucket_label_table.string());
      }
    }
  }

  std::set<int> distinct(raw_bucket_label.begin(), raw_bucket_label.end());
  if (distinct.size() < 2) throw Error(ErrorCode::SingleClass, path.string());
  std::map<int, int> renumber;
  for (int v : distinct) {
    renumber[v] = static_cast<int>(renumber.size()) + 1;
    ds.class_names.push_back(std::to_string(v));
  }
  for (int raw : raw_bucket_label) ds.bucket_labels.push_back(renumber[raw]);

  const std::size_t n = ds.unit_ids.size();
  ds.features = Matrix(n, feature_cols.size());
  std::copy(values.begin(), values.end(), ds.features.values().begin());
  require_valid(ds);
  return ds;
}

void write_csv(const BucketedDataset& ds, const std::filesystem::path& path, char delim) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "unit_id" << delim << "bucket_id" << delim << "label";
  for (std::size_t c = 0; c < ds.num_features(); ++c) {
    out << delim
        << quote_if_needed(ds.feature_names.empty() ? "f" + std::to_string(c) : ds.feature_names[c],
                           delim);
  }
  out << '\n';
  for (std::size_t i = 0; i < ds.num_units(); ++i) {
    const int label = ds.unit_label(i);
    const std::string& label_text =
        ds.class_names.empty() ? std::to_string(label)
                               : ds.class_names[static_cast<std::size_t>(label - 1)];
    out << quote_if_needed(ds.unit_ids[i], delim) << delim
        << quote_if_needed(ds.bucket_ids[ds.bucket_of[i]], delim) << delim << label_text;
    for (double v : ds.features.row(i)) out << delim << format_double(v);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace bucketperm
