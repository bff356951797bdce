#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bilevel/oracle.hpp"
#include "bilevel/vec.hpp"

namespace bilevel {

// Binary-labeled feature rows with train/val/test split tags and a record of
// which training labels were flipped.
struct Dataset {
  std::vector<Vector> features;
  std::vector<int> labels;          // 0 or 1
  std::vector<bool> corrupted;      // true = label was flipped
  std::vector<Split> splits;

  std::size_t size() const { return features.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
  std::vector<std::size_t> split_indices(Split s) const;
};

// Two Gaussian class blobs with unit covariance and mean separation 4.0.
// Exactly round(p_corrupt * n_train) training labels are flipped; validation
// and test rows are never corrupted.
Dataset generate_hyperclean_dataset(std::size_t n_train, std::size_t n_val,
                                    std::size_t n_test, std::size_t d,
                                    double p_corrupt, std::uint64_t seed);

// Text format: comma-separated with header
//   split,label[,corrupted],f0..f{d-1}
// UTF-8, LF line endings. A missing corrupted column loads as all-false.
Dataset load_dataset_csv(const std::string& path);
void write_dataset_csv(const Dataset& ds, const std::string& path);

}  // namespace bilevel
