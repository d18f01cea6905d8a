#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace provaudit {

// SHA-256 content digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  static Digest from_hex(std::string_view hex);
  auto operator<=>(const Digest&) const = default;
};

Digest sha256(std::span<const std::uint8_t> data);

// Incremental hashing for digests over several buffers.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::uint8_t> data);
  void update(std::string_view text);
  Digest finish();

 private:
  struct State;
  State* state_;
};

}  // namespace provaudit
