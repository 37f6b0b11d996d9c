#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "fpl/bytes.hpp"

namespace fpl {

using Version = std::uint64_t;
using Epoch = std::uint64_t;
using Tick = std::int64_t;
using ValidatorId = std::uint32_t;

struct ObjectId {
  Digest value;

  // Deterministic id for a human-readable label ("A", "alice-gas", ...).
  static ObjectId from_label(std::string_view label);

  std::string short_hex() const { return value.short_hex(); }
  auto operator<=>(const ObjectId&) const = default;
};

struct ObjectKey {
  ObjectId id;
  Version version = 0;

  ObjectKey next() const { return {id, version + 1}; }
  std::string to_string() const;  // "<short id>@<version>"
  auto operator<=>(const ObjectKey&) const = default;
};

struct PublicKey {
  Digest value;

  static PublicKey for_user(std::string_view name);
  static PublicKey for_validator(ValidatorId id);

  auto operator<=>(const PublicKey&) const = default;
};

struct Signature {
  Digest value;
  auto operator<=>(const Signature&) const = default;
};

// Root digest of an authenticator tree. Plain single-key owners commit to a
// one-leaf tree, so every owner field has the same shape on the wire.
struct AuthCommitment {
  Digest root;
  auto operator<=>(const AuthCommitment&) const = default;
};

void encode(Encoder& e, const ObjectKey& k);
ObjectKey decode_object_key(Decoder& d);

}  // namespace fpl
