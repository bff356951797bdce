#include "bilevel/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bilevel/rng.hpp"

namespace bilevel {
namespace {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view field, std::size_t line_no,
                    const char* what) {
  double out = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw FormatError("line " + std::to_string(line_no) + ": bad " + what +
                      " value '" + std::string(field) + "'");
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

}  // namespace

std::vector<std::size_t> Dataset::split_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    if (splits[i] == s) out.push_back(i);
  }
  return out;
}

Dataset generate_hyperclean_dataset(std::size_t n_train, std::size_t n_val,
                                    std::size_t n_test, std::size_t d,
                                    double p_corrupt, std::uint64_t seed) {
  if (n_train < 1 || n_val < 1 || n_test < 1 || d < 1) {
    throw InvalidArgumentError("generate_hyperclean_dataset: sizes must be >= 1");
  }
  if (!(p_corrupt >= 0.0 && p_corrupt <= 1.0)) {
    throw InvalidArgumentError("generate_hyperclean_dataset: rate not in [0,1]");
  }
  RngStream root(seed, "hyperclean-data");
  RngStream label_rs = root.child("labels");
  RngStream feat_rs = root.child("features");

  // Class means at +-2/sqrt(d) per coordinate: separation exactly 4.0.
  const double half = 2.0 / std::sqrt(static_cast<double>(d));

  Dataset ds;
  const std::size_t n = n_train + n_val + n_test;
  ds.features.reserve(n);
  ds.labels.reserve(n);
  ds.corrupted.assign(n, false);
  ds.splits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = label_rs.next_double() < 0.5 ? 0 : 1;
    const double mean = label == 1 ? half : -half;
    Vector row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = mean + feat_rs.next_gaussian();
    ds.features.push_back(std::move(row));
    ds.labels.push_back(label);
    ds.splits.push_back(i < n_train ? Split::kTrain
                        : i < n_train + n_val ? Split::kValidation
                                              : Split::kTest);
  }

  // Flip exactly round(p * n_train) training labels, chosen by a seeded
  // shuffle of the training rows.
  const auto n_flip = static_cast<std::size_t>(
      std::llround(p_corrupt * static_cast<double>(n_train)));
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
  RngStream shuffle_rs = root.child("corruption");
  for (std::size_t i = n_train; i > 1; --i) {
    std::swap(order[i - 1], order[shuffle_rs.next_index(i)]);
  }
  for (std::size_t i = 0; i < n_flip; ++i) {
    const std::size_t row = order[i];
    ds.labels[row] = 1 - ds.labels[row];
    ds.corrupted[row] = true;
  }
  return ds;
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty dataset file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_csv_line(line);
  std::size_t col = 0;
  if (col >= header.size() || header[col] != "split") {
    throw FormatError("line 1: expected 'split' as first column");
  }
  ++col;
  if (col >= header.size() || header[col] != "label") {
    throw FormatError("line 1: expected 'label' as second column");
  }
  ++col;
  bool has_corrupted = false;
  if (col < header.size() && header[col] == "corrupted") {
    has_corrupted = true;
    ++col;
  }
  const std::size_t first_feature = col;
  for (std::size_t j = col; j < header.size(); ++j) {
    const std::string expected = "f" + std::to_string(j - first_feature);
    if (header[j] != expected) {
      throw FormatError("line 1: expected feature column '" + expected +
                        "', found '" + header[j] + "'");
    }
  }
  const std::size_t d = header.size() - first_feature;
  if (d == 0) throw FormatError("line 1: no feature columns");

  Dataset ds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw FormatError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    Split split;
    if (fields[0] == "train") split = Split::kTrain;
    else if (fields[0] == "val") split = Split::kValidation;
    else if (fields[0] == "test") split = Split::kTest;
    else {
      throw FormatError("line " + std::to_string(line_no) + ": bad split '" +
                        fields[0] + "'");
    }
    int label;
    if (fields[1] == "0") label = 0;
    else if (fields[1] == "1") label = 1;
    else {
      throw FormatError("line " + std::to_string(line_no) + ": bad label '" +
                        fields[1] + "'");
    }
    bool corrupted = false;
    if (has_corrupted) {
      if (fields[2] == "0") corrupted = false;
      else if (fields[2] == "1") corrupted = true;
      else {
        throw FormatError("line " + std::to_string(line_no) +
                          ": bad corrupted flag '" + fields[2] + "'");
      }
    }
    Vector row(d);
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = parse_double(fields[first_feature + j], line_no, "feature");
    }
    ds.features.push_back(std::move(row));
    ds.labels.push_back(label);
    ds.corrupted.push_back(corrupted);
    ds.splits.push_back(split);
  }
  return ds;
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open dataset file for writing: " + path);
  out << "split,label,corrupted";
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << split_name(ds.splits[i]) << ',' << ds.labels[i] << ','
        << (ds.corrupted[i] ? 1 : 0);
    for (double v : ds.features[i]) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw FormatError("failed writing dataset file: " + path);
}

}  // namespace bilevel
