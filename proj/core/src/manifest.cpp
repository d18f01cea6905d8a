#include "provaudit/manifest.hpp"

#include <json.hpp>
#include <unordered_set>

#include "provaudit/error.hpp"

namespace provaudit {

using ordered_json = nlohmann::ordered_json;

void CorpusManifest::validate() const {
  std::unordered_set<std::string> hashes;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].id <= entries[i - 1].id) {
      throw CorpusIntegrityError("manifest entry ids must be strictly increasing");
    }
    if (!hashes.insert(entries[i].sha256).second) {
      throw CorpusIntegrityError("duplicate content hash in manifest: " +
                                 entries[i].sha256);
    }
  }
}

const ManifestEntry* CorpusManifest::find_by_hash(const std::string& sha256_hex) const {
  for (const auto& e : entries) {
    if (e.sha256 == sha256_hex) return &e;
  }
  return nullptr;
}

const ManifestEntry* CorpusManifest::find_by_id(std::uint64_t id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::string CorpusManifest::to_json() const {
  ordered_json doc;
  doc["corpus_id"] = corpus_id;
  doc["entries"] = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json j;
    j["id"] = e.id;
    j["path"] = e.path;
    j["sha256"] = e.sha256;
    j["offset"] = e.offset;
    j["aliases"] = e.aliases;
    doc["entries"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

CorpusManifest CorpusManifest::from_json(const std::string& text) {
  CorpusManifest m;
  try {
    const auto doc = ordered_json::parse(text);
    m.corpus_id = doc.at("corpus_id").get<std::string>();
    for (const auto& j : doc.at("entries")) {
      ManifestEntry e;
      e.id = j.at("id").get<std::uint64_t>();
      e.path = j.at("path").get<std::string>();
      e.sha256 = j.at("sha256").get<std::string>();
      e.offset = j.at("offset").get<std::uint64_t>();
      if (j.contains("aliases")) {
        e.aliases = j.at("aliases").get<std::vector<std::string>>();
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("invalid manifest JSON: ") + ex.what());
  }
  m.validate();
  return m;
}

Digest corpus_fingerprint(const CorpusManifest& manifest) {
  Sha256 h;
  h.update(manifest.corpus_id);
  h.update("\n");
  for (const auto& e : manifest.entries) {
    h.update(std::to_string(e.id));
    h.update(":");
    h.update(e.sha256);
    h.update("\n");
  }
  return h.finish();
}

}  // namespace provaudit
