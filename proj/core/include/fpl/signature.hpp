#pragma once

#include <memory>
#include <string_view>

#include "fpl/ids.hpp"

namespace fpl {

// Pluggable signing. Protocol code only ever asks "did pk sign this digest";
// the scheme behind it is swappable.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;
  virtual std::string_view name() const = 0;
  virtual Signature sign(const PublicKey& signer, const Digest& message) const = 0;
  virtual bool verify(const PublicKey& signer, const Digest& message, const Signature& sig) const = 0;
};

// sig = H("fpl/sig" || pk || message). Deterministic and unforgeable only in
// the sense that honest simulated actors never sign on another key's behalf.
class DigestSignatureScheme final : public SignatureScheme {
 public:
  std::string_view name() const override { return "digest-v1"; }
  Signature sign(const PublicKey& signer, const Digest& message) const override;
  bool verify(const PublicKey& signer, const Digest& message, const Signature& sig) const override;
};

std::shared_ptr<const SignatureScheme> default_signature_scheme();

}  // namespace fpl
