#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "primesh/replay/experience.hpp"

namespace primesh {

using Rng = std::mt19937_64;

/// Fixed-capacity ring of experiences. When full, a push overwrites the
/// oldest record. Index 0 is always the oldest record still held.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Throws ContractViolation for a non-finite reward or a feature length
  /// that differs from the records already held.
  void push(Experience e);
  void clear();

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  const Experience& operator[](std::size_t i) const;

  /// Uniform draw. Throws ContractViolation when empty.
  const Experience& sample(Rng& rng) const;

 private:
  std::vector<Experience> records_;
  std::size_t capacity_ = 0;
  std::size_t head_ = 0;  // slot of the oldest record
  std::size_t size_ = 0;
  std::size_t feature_size_ = 0;
};

/// batch/2 uniform draws with replacement from each buffer, shuffled.
/// Requires an even batch and two non-empty buffers.
std::vector<const Experience*> sample_equal(const ReplayBuffer& a, const ReplayBuffer& b, int batch, Rng& rng);

/// `batch` uniform draws with replacement from one buffer.
std::vector<const Experience*> sample_uniform(const ReplayBuffer& buffer, int batch, Rng& rng);

// Demonstration archive: "PXPR", u32 version, u32 reference count, each
// reference as 128*128 f32; u64 record count; per record two observations
// (u32 reference index, u32 feature count, f32 features, i32 legal begin,
// i32 legal end), i32 action, f64 reward, u8 done, u8 is_demo. Little-endian.
void write_archive(std::span<const Experience> records, std::ostream& out);
std::vector<Experience> read_archive(std::istream& in);
void save_archive(std::span<const Experience> records, const std::filesystem::path& path);
std::vector<Experience> load_archive(const std::filesystem::path& path);

}  // namespace primesh
