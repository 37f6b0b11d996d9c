#include "fpl/bytes.hpp"

#include <openssl/evp.h>

#include <memory>

#include "fpl/result.hpp"

namespace fpl {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

bool Digest::is_zero() const {
  for (auto b : bytes) {
    if (b != 0) return false;
  }
  return true;
}

std::string Digest::hex() const { return to_hex(bytes); }

std::string Digest::short_hex() const { return hex().substr(0, 8); }

Digest Digest::from_hex(std::string_view hex) {
  Bytes raw = fpl::from_hex(hex);
  if (raw.size() != 32) throw DecodeError("digest must be 32 bytes");
  Digest d;
  std::copy(raw.begin(), raw.end(), d.bytes.begin());
  return d;
}

namespace {

// One reusable context per thread; EVP_MD_CTX allocation dominates short hashes.
class Sha256Context {
 public:
  Sha256Context() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free), md_(EVP_MD_fetch(nullptr, "SHA256", nullptr), &EVP_MD_free) {
    if (!ctx_ || !md_) throw std::runtime_error("SHA-256 unavailable");
  }
  // An explicitly fetched digest skips the per-call provider lookup.
  void init() { EVP_DigestInit_ex2(ctx_.get(), md_.get(), nullptr); }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_.get(), p, n); }
  Digest finish() {
    Digest d;
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), d.bytes.data(), &len);
    return d;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
  std::unique_ptr<EVP_MD, decltype(&EVP_MD_free)> md_;
};

Sha256Context& thread_context() {
  thread_local Sha256Context ctx;
  return ctx;
}

}  // namespace

Digest sha256(ByteView data) {
  auto& ctx = thread_context();
  ctx.init();
  ctx.update(data.data(), data.size());
  return ctx.finish();
}

Digest sha256(std::string_view data) {
  return sha256(ByteView(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

Digest tagged_hash(std::string_view tag, ByteView data) {
  std::uint8_t len[4];
  auto n = static_cast<std::uint32_t>(tag.size());
  for (int i = 0; i < 4; ++i) len[i] = static_cast<std::uint8_t>(n >> (8 * i));
  auto& ctx = thread_context();
  ctx.init();
  ctx.update(len, 4);
  ctx.update(tag.data(), tag.size());
  ctx.update(data.data(), data.size());
  return ctx.finish();
}

std::string to_hex(ByteView data) {
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw DecodeError("odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw DecodeError("invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Encoder& Encoder::u8(std::uint8_t v) {
  buf_.push_back(v);
  return *this;
}

Encoder& Encoder::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Encoder& Encoder::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Encoder& Encoder::i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }

Encoder& Encoder::digest(const Digest& d) {
  buf_.insert(buf_.end(), d.bytes.begin(), d.bytes.end());
  return *this;
}

Encoder& Encoder::bytes(ByteView b) {
  u32(static_cast<std::uint32_t>(b.size()));
  buf_.insert(buf_.end(), b.begin(), b.end());
  return *this;
}

Encoder& Encoder::str(std::string_view s) {
  return bytes(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

Encoder& Encoder::raw(ByteView b) {
  buf_.insert(buf_.end(), b.begin(), b.end());
  return *this;
}

void Decoder::need(std::size_t n) const {
  if (remaining() < n) throw DecodeError("truncated input");
}

std::uint8_t Decoder::u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t Decoder::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t Decoder::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_++]) << (8 * i);
  return v;
}

std::int64_t Decoder::i64() { return static_cast<std::int64_t>(u64()); }

bool Decoder::boolean() {
  auto v = u8();
  if (v > 1) throw DecodeError("invalid boolean");
  return v == 1;
}

Digest Decoder::digest() {
  need(32);
  Digest d;
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
            data_.begin() + static_cast<std::ptrdiff_t>(pos_ + 32), d.bytes.begin());
  pos_ += 32;
  return d;
}

Bytes Decoder::bytes() {
  auto n = u32();
  need(n);
  Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
            data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

std::string Decoder::str() {
  auto b = bytes();
  return std::string(b.begin(), b.end());
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformed: return "Malformed";
    case ErrorCode::kConflictingLock: return "ConflictingLock";
    case ErrorCode::kMissingObject: return "MissingObject";
    case ErrorCode::kStaleVersion: return "StaleVersion";
    case ErrorCode::kBadEvidence: return "BadEvidence";
    case ErrorCode::kObjectUnlocked: return "ObjectUnlocked";
    case ErrorCode::kWrongEpoch: return "WrongEpoch";
    case ErrorCode::kEpochChanging: return "EpochChanging";
    case ErrorCode::kInvalidCertificate: return "InvalidCertificate";
    case ErrorCode::kAlreadyConfirmed: return "AlreadyConfirmed";
    case ErrorCode::kBadGas: return "BadGas";
    case ErrorCode::kInvalidUnlockCert: return "InvalidUnlockCert";
    case ErrorCode::kInsufficientBalance: return "InsufficientBalance";
    case ErrorCode::kInsufficientGas: return "InsufficientGas";
    case ErrorCode::kBudgetExhausted: return "BudgetExhausted";
    case ErrorCode::kMalformedPath: return "MalformedPath";
    case ErrorCode::kInvalidReveal: return "InvalidReveal";
    case ErrorCode::kDepthExceeded: return "DepthExceeded";
    case ErrorCode::kIncomplete: return "Incomplete";
    case ErrorCode::kMixedRequests: return "MixedRequests";
    case ErrorCode::kInvalidItem: return "InvalidItem";
    case ErrorCode::kInsufficientReplies: return "InsufficientReplies";
  }
  return "Unknown";
}

ErrorCode error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kInsufficientReplies); ++i) {
    auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  throw std::invalid_argument("unknown error code: " + std::string(name));
}

}  // namespace fpl
