#include "primesh/replay/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "primesh/io/binary.hpp"

namespace primesh {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity > 0, "replay buffer capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  require(std::isfinite(e.reward), "replay buffer: non-finite reward");
  const std::size_t n = e.observation.features.size();
  require(e.next_observation.features.size() == n, "replay buffer: observation lengths differ within a record");
  if (size_ > 0) require(n == feature_size_, "replay buffer: observation length differs from earlier records");
  feature_size_ = n;
  if (size_ < capacity_) {
    // Storage grows up to capacity; until the first wrap head_ stays 0.
    if (records_.size() < capacity_ && head_ == 0 && size_ == records_.size()) records_.push_back(std::move(e));
    else records_[(head_ + size_) % capacity_] = std::move(e);
    ++size_;
  } else {
    records_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
  }
}

void ReplayBuffer::clear() {
  records_.clear();
  head_ = 0;
  size_ = 0;
}

const Experience& ReplayBuffer::operator[](std::size_t i) const {
  require(i < size_, "replay buffer index out of range");
  return records_[(head_ + i) % capacity_];
}

const Experience& ReplayBuffer::sample(Rng& rng) const {
  require(size_ > 0, "cannot sample an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  return (*this)[pick(rng)];
}

std::vector<const Experience*> sample_equal(const ReplayBuffer& a, const ReplayBuffer& b, int batch, Rng& rng) {
  require(batch > 0 && batch % 2 == 0, "sample_equal: batch must be positive and even");
  require(!a.empty() && !b.empty(), "sample_equal: both buffers must be non-empty");
  std::vector<const Experience*> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch / 2; ++i) out.push_back(&a.sample(rng));
  for (int i = 0; i < batch / 2; ++i) out.push_back(&b.sample(rng));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<const Experience*> sample_uniform(const ReplayBuffer& buffer, int batch, Rng& rng) {
  require(batch > 0, "sample_uniform: batch must be positive");
  std::vector<const Experience*> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) out.push_back(&buffer.sample(rng));
  return out;
}

namespace {

constexpr std::uint32_t kArchiveVersion = 1;

void write_observation(std::ostream& out, const Observation& o, const std::map<const DepthMap*, std::uint32_t>& refs) {
  io::write_pod(out, refs.at(o.reference.get()));
  io::write_pod(out, static_cast<std::uint32_t>(o.features.size()));
  io::write_array(out, std::span<const float>(o.features));
  io::write_pod(out, static_cast<std::int32_t>(o.legal.begin));
  io::write_pod(out, static_cast<std::int32_t>(o.legal.end));
}

Observation read_observation(std::istream& in, const std::vector<std::shared_ptr<const DepthMap>>& refs) {
  Observation o;
  const auto ref = io::read_pod<std::uint32_t>(in, "archive observation");
  if (ref >= refs.size()) throw FormatError("archive: reference index out of range");
  o.reference = refs[ref];
  const auto n = io::read_pod<std::uint32_t>(in, "archive observation");
  if (n > (1U << 20)) throw FormatError("archive: implausible feature count");
  o.features.resize(n);
  io::read_array(in, std::span<float>(o.features), "archive features");
  o.legal.begin = io::read_pod<std::int32_t>(in, "archive observation");
  o.legal.end = io::read_pod<std::int32_t>(in, "archive observation");
  return o;
}

}  // namespace

void write_archive(std::span<const Experience> records, std::ostream& out) {
  std::map<const DepthMap*, std::uint32_t> refs;
  std::vector<const DepthMap*> order;
  for (const auto& r : records) {
    for (const auto* o : {&r.observation, &r.next_observation}) {
      require(o->reference != nullptr, "write_archive: observation without a reference raster");
      if (refs.emplace(o->reference.get(), static_cast<std::uint32_t>(order.size())).second)
        order.push_back(o->reference.get());
    }
  }
  out.write("PXPR", 4);
  io::write_pod(out, kArchiveVersion);
  io::write_pod(out, static_cast<std::uint32_t>(order.size()));
  for (const auto* ref : order) io::write_array(out, ref->values());
  io::write_pod(out, static_cast<std::uint64_t>(records.size()));
  for (const auto& r : records) {
    write_observation(out, r.observation, refs);
    write_observation(out, r.next_observation, refs);
    io::write_pod(out, static_cast<std::int32_t>(r.action));
    io::write_pod(out, r.reward);
    io::write_pod(out, static_cast<std::uint8_t>(r.done));
    io::write_pod(out, static_cast<std::uint8_t>(r.is_demo));
  }
  if (!out) throw FormatError("write_archive: write failed");
}

std::vector<Experience> read_archive(std::istream& in) {
  io::expect_magic(in, "PXPR", "archive");
  const auto version = io::read_pod<std::uint32_t>(in, "archive header");
  if (version != kArchiveVersion) throw FormatError("archive: unsupported version " + std::to_string(version));
  const auto ref_count = io::read_pod<std::uint32_t>(in, "archive header");
  if (ref_count > (1U << 16)) throw FormatError("archive: implausible reference count");
  std::vector<std::shared_ptr<const DepthMap>> refs;
  for (std::uint32_t i = 0; i < ref_count; ++i) {
    auto map = std::make_shared<DepthMap>();
    io::read_array(in, map->values(), "archive reference");
    refs.push_back(std::move(map));
  }
  const auto count = io::read_pod<std::uint64_t>(in, "archive header");
  std::vector<Experience> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    Experience e;
    e.observation = read_observation(in, refs);
    e.next_observation = read_observation(in, refs);
    e.action = io::read_pod<std::int32_t>(in, "archive record");
    e.reward = io::read_pod<double>(in, "archive record");
    e.done = io::read_pod<std::uint8_t>(in, "archive record") != 0;
    e.is_demo = io::read_pod<std::uint8_t>(in, "archive record") != 0;
    out.push_back(std::move(e));
  }
  return out;
}

void save_archive(std::span<const Experience> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_archive(records, out);
}

std::vector<Experience> load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_archive(in);
}

}  // namespace primesh
