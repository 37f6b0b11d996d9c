#include "fpl/ids.hpp"

namespace fpl {

ObjectId ObjectId::from_label(std::string_view label) {
  Encoder e;
  e.str(label);
  return ObjectId{e.hash("fpl/object-id")};
}

std::string ObjectKey::to_string() const { return id.short_hex() + "@" + std::to_string(version); }

PublicKey PublicKey::for_user(std::string_view name) {
  Encoder e;
  e.str(name);
  return PublicKey{e.hash("fpl/user-key")};
}

PublicKey PublicKey::for_validator(ValidatorId id) {
  Encoder e;
  e.u32(id);
  return PublicKey{e.hash("fpl/validator-key")};
}

void encode(Encoder& e, const ObjectKey& k) { e.digest(k.id.value).u64(k.version); }

ObjectKey decode_object_key(Decoder& d) {
  ObjectKey k;
  k.id.value = d.digest();
  k.version = d.u64();
  return k;
}

}  // namespace fpl
