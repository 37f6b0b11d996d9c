#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fpl {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// 32-byte SHA-256 output. Ordered so it can key std::map deterministically.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  static Digest zero() { return {}; }
  bool is_zero() const;
  std::string hex() const;
  std::string short_hex() const;  // first 8 hex chars, for logs
  static Digest from_hex(std::string_view hex);

  auto operator<=>(const Digest&) const = default;
};

Digest sha256(ByteView data);
Digest sha256(std::string_view data);

// Domain-separated hash: H(len(tag) || tag || data).
Digest tagged_hash(std::string_view tag, ByteView data);

std::string to_hex(ByteView data);
Bytes from_hex(std::string_view hex);

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical serialization: fixed-width little-endian integers, u32 length
// prefixes on variable-length fields, fields written in declaration order.
class Encoder {
 public:
  Encoder& u8(std::uint8_t v);
  Encoder& u32(std::uint32_t v);
  Encoder& u64(std::uint64_t v);
  Encoder& i64(std::int64_t v);
  Encoder& boolean(bool v) { return u8(v ? 1 : 0); }
  Encoder& digest(const Digest& d);
  Encoder& bytes(ByteView b);  // length-prefixed
  Encoder& str(std::string_view s);
  Encoder& raw(ByteView b);  // no prefix

  const Bytes& buffer() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }
  Digest hash(std::string_view tag) const { return tagged_hash(tag, buf_); }

 private:
  Bytes buf_;
};

class Decoder {
 public:
  explicit Decoder(ByteView data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  bool boolean();
  Digest digest();
  Bytes bytes();
  std::string str();

  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace fpl
