#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bilevel/errors.hpp"

namespace bilevel {

// Counter-based keyed generator. The draw at position c depends only on
// (seed, label, c), so labeled child streams are reproducible regardless of
// the order in which sibling streams are consumed. Streams are cheap values;
// do not share one instance between threads.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string label);

  // Derives an independent stream for "<label>/<sublabel>".
  RngStream child(std::string_view sublabel) const;

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double next_double();

  // Uniform in {0, ..., n-1}; consumes exactly one u64 per call.
  std::size_t next_index(std::size_t n);

  // Standard normal via the polar method (variable draw consumption).
  double next_gaussian();

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Batch of with-replacement sample indices.
struct BatchIndices {
  std::vector<std::size_t> indices;
  std::size_t source_size = 0;

  std::size_t size() const { return indices.size(); }
};

// Uniform-with-replacement minibatch. Consumes one u64 per index.
BatchIndices sample_batch(RngStream& stream, std::size_t source_size,
                          std::size_t batch_size);

// Batch {0, 1, ..., n-1}; the deterministic full-population evaluation.
BatchIndices full_batch(std::size_t source_size);

}  // namespace bilevel
