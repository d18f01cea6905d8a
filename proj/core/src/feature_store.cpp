#include "provaudit/feature_store.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "provaudit/error.hpp"

namespace provaudit {

std::vector<LevelShape> level_shapes(const FeatureStack& stack) {
  std::vector<LevelShape> shapes;
  for (const auto& l : stack.levels) {
    shapes.push_back({static_cast<std::uint32_t>(l.channels),
                      static_cast<std::uint32_t>(l.height),
                      static_cast<std::uint32_t>(l.width)});
  }
  return shapes;
}

FeatureFile::FeatureFile(std::string embedder_id, std::vector<LevelShape> shapes)
    : embedder_id_(std::move(embedder_id)), shapes_(std::move(shapes)) {
  if (shapes_.empty()) throw FormatError("feature file needs at least one level");
}

std::size_t FeatureFile::pooled_dim() const {
  std::size_t dim = 0;
  for (const auto& s : shapes_) dim += s.channels;
  return dim;
}

void FeatureFile::add(FeatureRecord record) {
  if (!records_.empty() && record.entry_id <= records_.back().entry_id) {
    throw CorpusIntegrityError("feature records must have increasing entry ids");
  }
  if (level_shapes(record.stack) != shapes_) {
    throw FormatError("feature stack for entry " +
                      std::to_string(record.entry_id) +
                      " does not match declared level shapes");
  }
  if (record.pooled.vector.size() != pooled_dim()) {
    throw FormatError("pooled vector length mismatch for entry " +
                      std::to_string(record.entry_id));
  }
  by_id_.emplace(record.entry_id, records_.size());
  records_.push_back(std::move(record));
}

const FeatureRecord* FeatureFile::find(std::uint64_t entry_id) const {
  const auto it = by_id_.find(entry_id);
  return it == by_id_.end() ? nullptr : &records_[it->second];
}

EmbeddingSet FeatureFile::embeddings() const {
  EmbeddingSet set(pooled_dim());
  for (const auto& r : records_) set.add(r.entry_id, r.pooled.vector);
  return set;
}

std::vector<std::uint8_t> FeatureFile::serialize(
    std::vector<std::uint64_t>* record_offsets) const {
  detail::ByteWriter w;
  w.magic("PAF1");
  w.u32(kVersion);
  w.string(embedder_id_);
  w.u32(static_cast<std::uint32_t>(shapes_.size()));
  for (const auto& s : shapes_) {
    w.u32(s.channels);
    w.u32(s.height);
    w.u32(s.width);
  }
  w.u64(records_.size());
  if (record_offsets != nullptr) record_offsets->clear();
  for (const auto& r : records_) {
    if (record_offsets != nullptr) record_offsets->push_back(w.size());
    w.u64(r.entry_id);
    w.f32s(r.pooled.vector);
    for (const auto& level : r.stack.levels) w.f32s(level.values);
  }
  return w.take();
}

FeatureFile FeatureFile::parse(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "PAF1");
  r.expect_magic("PAF1");
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("unsupported PAF1 version " + std::to_string(version));
  }
  std::string embedder = r.string();
  const std::uint32_t n_levels = r.u32();
  if (n_levels == 0 || n_levels > 64) {
    throw FormatError("PAF1 level count out of range");
  }
  std::vector<LevelShape> shapes(n_levels);
  std::uint64_t floats_per_entry = 0;
  for (auto& s : shapes) {
    s.channels = r.u32();
    s.height = r.u32();
    s.width = r.u32();
    if (s.channels == 0 || s.height == 0 || s.width == 0) {
      throw FormatError("PAF1 level with zero extent");
    }
    floats_per_entry += s.channels + static_cast<std::uint64_t>(s.channels) * s.height * s.width;
  }
  const std::uint64_t count = r.u64();
  if (count > r.remaining() / (8 + 4 * floats_per_entry)) {
    throw FormatError("PAF1 entry count exceeds file size");
  }
  FeatureFile file(std::move(embedder), shapes);
  for (std::uint64_t e = 0; e < count; ++e) {
    FeatureRecord rec;
    rec.entry_id = r.u64();
    std::vector<float> pooled(file.pooled_dim());
    r.f32s(pooled);
    rec.pooled = PooledEmbedding::from_vector(std::move(pooled));
    for (const auto& s : shapes) {
      FeatureLevel level{static_cast<int>(s.channels), static_cast<int>(s.height),
                         static_cast<int>(s.width), {}};
      level.values.resize(static_cast<std::size_t>(s.channels) * s.height * s.width);
      r.f32s(level.values);
      rec.stack.levels.push_back(std::move(level));
    }
    file.add(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw FormatError("PAF1 has " + std::to_string(r.remaining()) +
                      " trailing bytes");
  }
  return file;
}

FeatureFile FeatureFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse(bytes);
}

}  // namespace provaudit
