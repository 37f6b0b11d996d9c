#include "fpl/signature.hpp"

namespace fpl {

Signature DigestSignatureScheme::sign(const PublicKey& signer, const Digest& message) const {
  Encoder e;
  e.digest(signer.value).digest(message);
  return Signature{e.hash("fpl/sig")};
}

bool DigestSignatureScheme::verify(const PublicKey& signer, const Digest& message,
                                   const Signature& sig) const {
  return sign(signer, message) == sig;
}

std::shared_ptr<const SignatureScheme> default_signature_scheme() {
  static const auto scheme = std::make_shared<const DigestSignatureScheme>();
  return scheme;
}

}  // namespace fpl
