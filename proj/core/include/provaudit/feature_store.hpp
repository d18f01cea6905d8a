#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "provaudit/embedding.hpp"
#include "provaudit/metric.hpp"

namespace provaudit {

struct LevelShape {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  bool operator==(const LevelShape&) const = default;
};

struct FeatureRecord {
  std::uint64_t entry_id = 0;
  PooledEmbedding pooled;
  FeatureStack stack;
};

// In-memory form of the "PAF1" interchange file:
//
//   "PAF1" | version u32 | embedder_id (u32 length + UTF-8) | level count u32
//   | per level: channels u32, height u32, width u32 | entry count u64
//   | per entry: entry_id u64, pooled f32[sum channels],
//                per level f32[height * width * channels] (y, x, c order)
//
// All integers and floats little-endian.
class FeatureFile {
 public:
  static constexpr std::uint32_t kVersion = 1;

  FeatureFile() = default;
  FeatureFile(std::string embedder_id, std::vector<LevelShape> shapes);

  const std::string& embedder_id() const noexcept { return embedder_id_; }
  std::span<const LevelShape> shapes() const noexcept { return shapes_; }
  std::span<const FeatureRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t pooled_dim() const;

  // Appends a record; ids must be strictly increasing and the stack must
  // match the declared level shapes.
  void add(FeatureRecord record);

  const FeatureRecord* find(std::uint64_t entry_id) const;
  EmbeddingSet embeddings() const;

  // Serialized bytes; `record_offsets` receives each record's byte offset.
  std::vector<std::uint8_t> serialize(
      std::vector<std::uint64_t>* record_offsets = nullptr) const;
  static FeatureFile parse(std::span<const std::uint8_t> bytes);

  static FeatureFile load(const std::filesystem::path& path);

 private:
  std::string embedder_id_;
  std::vector<LevelShape> shapes_;
  std::vector<FeatureRecord> records_;
  std::unordered_map<std::uint64_t, std::size_t> by_id_;
};

std::vector<LevelShape> level_shapes(const FeatureStack& stack);

}  // namespace provaudit
