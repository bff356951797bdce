#include "bilevel/rng.hpp"

#include <cmath>

namespace bilevel {
namespace {

// splitmix64 finalizer; bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)) {
  key_ = mix64(mix64(seed_ + kGolden) ^ fnv1a64(label_));
}

RngStream RngStream::child(std::string_view sublabel) const {
  std::string sub = label_;
  sub += '/';
  sub += sublabel;
  return RngStream(seed_, std::move(sub));
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::next_index(std::size_t n) {
  // Multiply-high maps the u64 range onto [0, n) with O(n / 2^64) bias and a
  // fixed counter advance of one per index.
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<std::size_t>(prod >> 64);
}

double RngStream::next_gaussian() {
  for (;;) {
    const double u = 2.0 * next_double() - 1.0;
    const double v = 2.0 * next_double() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) {
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }
}

BatchIndices sample_batch(RngStream& stream, std::size_t source_size,
                          std::size_t batch_size) {
  if (source_size < 1) {
    throw InvalidArgumentError("sample_batch: source_size must be >= 1");
  }
  if (batch_size < 1) {
    throw InvalidArgumentError("sample_batch: batch_size must be >= 1");
  }
  BatchIndices batch;
  batch.source_size = source_size;
  batch.indices.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    batch.indices[i] = stream.next_index(source_size);
  }
  return batch;
}

BatchIndices full_batch(std::size_t source_size) {
  BatchIndices batch;
  batch.source_size = source_size;
  batch.indices.resize(source_size);
  for (std::size_t i = 0; i < source_size; ++i) batch.indices[i] = i;
  return batch;
}

}  // namespace bilevel
