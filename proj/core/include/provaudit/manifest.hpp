#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "provaudit/digest.hpp"

namespace provaudit {

struct ManifestEntry {
  std::uint64_t id = 0;
  std::string path;    // relative to the corpus directory
  std::string sha256;  // hex digest of the file bytes
  std::uint64_t offset = 0;  // byte offset of the record in the feature file
  std::vector<std::string> aliases;  // byte-identical duplicates

  bool operator==(const ManifestEntry&) const = default;
};

// The training corpus. Serialized as UTF-8 JSON:
//   {"corpus_id": ..., "entries": [{"id", "path", "sha256", "offset",
//   "aliases"}, ...]}
struct CorpusManifest {
  std::string corpus_id;
  std::vector<ManifestEntry> entries;

  // Throws CorpusIntegrityError unless ids strictly increase and content
  // hashes are unique.
  void validate() const;
  const ManifestEntry* find_by_hash(const std::string& sha256_hex) const;
  const ManifestEntry* find_by_id(std::uint64_t id) const;

  std::string to_json() const;
  static CorpusManifest from_json(const std::string& text);

  bool operator==(const CorpusManifest&) const = default;
};

// Digest over (id, content hash) pairs; ties an index to its corpus.
Digest corpus_fingerprint(const CorpusManifest& manifest);

}  // namespace provaudit
