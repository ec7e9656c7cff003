#pragma once

// On-device encrypted storage of outcome records with AES-256-GCM.
// Blob layout: u32 big-endian length of the rest, then
//   12-byte nonce || ciphertext || 16-byte tag.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nof1/trial.hpp"

namespace nof1 {

class Key256 {
 public:
  static constexpr std::size_t kSize = 32;

  static Key256 generate();
  static Key256 from_bytes(std::span<const std::uint8_t> bytes);

  std::span<const std::uint8_t, kSize> bytes() const { return bytes_; }

 private:
  std::array<std::uint8_t, kSize> bytes_{};
};

// Reads a 32-byte key file, creating it (mode 0600) when absent.
Key256 load_or_create_key(const std::filesystem::path& path);

inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;

std::vector<std::uint8_t> seal(std::span<const std::uint8_t> plaintext, const Key256& key);
// Throws kAuthentication on a wrong key or any modified byte.
std::vector<std::uint8_t> open(std::span<const std::uint8_t> blob, const Key256& key);

std::vector<std::uint8_t> encrypt_record(const OutcomeRecord& record, const Key256& key);
OutcomeRecord decrypt_record(std::span<const std::uint8_t> blob, const Key256& key);

std::string to_base64(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_base64(const std::string& text);

// Append-only file of sealed records.
class LocalStore {
 public:
  LocalStore(std::filesystem::path path, Key256 key);

  void append(const OutcomeRecord& record);
  std::vector<OutcomeRecord> load_all() const;

 private:
  std::filesystem::path path_;
  Key256 key_;
};

}  // namespace nof1
