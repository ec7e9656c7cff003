#include "nof1/local_store.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>
#include <sys/stat.h>

#include <fstream>
#include <memory>

#include "nof1/error.hpp"
#include "nof1/json.hpp"

namespace nof1 {

namespace {

struct CtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter>;

void random_bytes(std::span<std::uint8_t> out) {
  require(RAND_bytes(out.data(), static_cast<int>(out.size())) == 1, ErrorCode::kInternal,
          "RAND_bytes failed");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) |
         (std::uint32_t{in[2]} << 8) | std::uint32_t{in[3]};
}

}  // namespace

Key256 Key256::generate() {
  Key256 k;
  random_bytes(k.bytes_);
  return k;
}

Key256 Key256::from_bytes(std::span<const std::uint8_t> bytes) {
  require(bytes.size() == kSize, ErrorCode::kInvalidArgument, "key must be 32 bytes", "key");
  Key256 k;
  std::copy(bytes.begin(), bytes.end(), k.bytes_.begin());
  return k;
}

Key256 load_or_create_key(const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
    return Key256::from_bytes(bytes);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto key = Key256::generate();
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(key.bytes().data()), Key256::kSize);
    require(static_cast<bool>(out), ErrorCode::kInternal, "cannot write key file", "key_path");
  }
  ::chmod(path.c_str(), 0600);
  return key;
}

std::vector<std::uint8_t> seal(std::span<const std::uint8_t> plaintext, const Key256& key) {
  std::array<std::uint8_t, kNonceSize> nonce{};
  random_bytes(nonce);

  CipherCtx ctx(EVP_CIPHER_CTX_new());
  require(ctx != nullptr, ErrorCode::kInternal, "EVP_CIPHER_CTX_new failed");
  require(EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
              EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceSize, nullptr) == 1 &&
              EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes().data(), nonce.data()) == 1,
          ErrorCode::kInternal, "AES-GCM init failed");

  std::vector<std::uint8_t> ct(plaintext.size());
  int len = 0;
  require(EVP_EncryptUpdate(ctx.get(), ct.data(), &len, plaintext.data(),
                            static_cast<int>(plaintext.size())) == 1,
          ErrorCode::kInternal, "AES-GCM encrypt failed");
  int fin = 0;
  require(EVP_EncryptFinal_ex(ctx.get(), ct.data() + len, &fin) == 1, ErrorCode::kInternal,
          "AES-GCM finalize failed");
  std::array<std::uint8_t, kTagSize> tag{};
  require(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kTagSize, tag.data()) == 1,
          ErrorCode::kInternal, "AES-GCM tag failed");

  std::vector<std::uint8_t> blob;
  blob.reserve(4 + kNonceSize + ct.size() + kTagSize);
  put_u32(blob, static_cast<std::uint32_t>(kNonceSize + ct.size() + kTagSize));
  blob.insert(blob.end(), nonce.begin(), nonce.end());
  blob.insert(blob.end(), ct.begin(), ct.end());
  blob.insert(blob.end(), tag.begin(), tag.end());
  return blob;
}

std::vector<std::uint8_t> open(std::span<const std::uint8_t> blob, const Key256& key) {
  require(blob.size() >= 4 + kNonceSize + kTagSize, ErrorCode::kAuthentication,
          "blob too short", "blob");
  const std::uint32_t body = get_u32(blob.first(4));
  require(body == blob.size() - 4, ErrorCode::kAuthentication, "blob length prefix mismatch",
          "blob");
  const auto nonce = blob.subspan(4, kNonceSize);
  const auto ct = blob.subspan(4 + kNonceSize, body - kNonceSize - kTagSize);
  std::array<std::uint8_t, kTagSize> tag{};
  std::copy_n(blob.end() - kTagSize, kTagSize, tag.begin());

  CipherCtx ctx(EVP_CIPHER_CTX_new());
  require(ctx != nullptr, ErrorCode::kInternal, "EVP_CIPHER_CTX_new failed");
  require(EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
              EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceSize, nullptr) == 1 &&
              EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.bytes().data(), nonce.data()) == 1,
          ErrorCode::kInternal, "AES-GCM init failed");
  std::vector<std::uint8_t> pt(ct.size());
  int len = 0;
  require(EVP_DecryptUpdate(ctx.get(), pt.data(), &len, ct.data(), static_cast<int>(ct.size())) == 1,
          ErrorCode::kAuthentication, "decryption failed", "blob");
  require(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kTagSize, tag.data()) == 1,
          ErrorCode::kInternal, "AES-GCM set tag failed");
  int fin = 0;
  require(EVP_DecryptFinal_ex(ctx.get(), pt.data() + len, &fin) == 1, ErrorCode::kAuthentication,
          "authentication failed: wrong key or tampered blob", "blob");
  return pt;
}

std::vector<std::uint8_t> encrypt_record(const OutcomeRecord& record, const Key256& key) {
  const std::string text = Json(record).dump();
  return seal({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()}, key);
}

OutcomeRecord decrypt_record(std::span<const std::uint8_t> blob, const Key256& key) {
  const auto pt = open(blob, key);
  return decode<OutcomeRecord>(parse_json({reinterpret_cast<const char*>(pt.data()), pt.size()}));
}

std::string to_base64(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> from_base64(const std::string& text) {
  require(text.size() % 4 == 0, ErrorCode::kValidation, "invalid base64 length", "base64");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  require(n >= 0, ErrorCode::kValidation, "invalid base64", "base64");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

LocalStore::LocalStore(std::filesystem::path path, Key256 key)
    : path_(std::move(path)), key_(key) {}

void LocalStore::append(const OutcomeRecord& record) {
  const auto blob = encrypt_record(record, key_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  require(static_cast<bool>(out), ErrorCode::kInternal, "cannot append to local store", "path");
}

std::vector<OutcomeRecord> LocalStore::load_all() const {
  std::vector<OutcomeRecord> out;
  if (!std::filesystem::exists(path_)) return out;
  std::ifstream in(path_, std::ios::binary);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), {});
  std::size_t pos = 0;
  while (pos < data.size()) {
    require(data.size() - pos >= 4, ErrorCode::kCorruptLog, "truncated local store", "path");
    const std::uint32_t body = get_u32(std::span(data).subspan(pos, 4));
    require(data.size() - pos - 4 >= body, ErrorCode::kCorruptLog, "truncated local store",
            "path");
    out.push_back(decrypt_record(std::span(data).subspan(pos, 4 + body), key_));
    pos += 4 + body;
  }
  return out;
}

}  // namespace nof1
