#include "fpl/execution.hpp"

#include <algorithm>

namespace fpl {

namespace {

bool is_mutable(const Object& o) { return o.kind == ObjectKind::kOwned || o.kind == ObjectKind::kShared; }

const Object* find(const std::map<ObjectId, Object>& objects, const ObjectId& id) {
  auto it = objects.find(id);
  return it == objects.end() ? nullptr : &it->second;
}

// Mutable inputs in transaction order: owned inputs, then shared inputs.
Result<std::vector<Object>> gather_mutable(const Transaction& tx, const std::map<ObjectId, Object>& objects) {
  std::vector<Object> out;
  for (const auto& k : tx.inputs) {
    const auto* o = find(objects, k.id);
    if (!o || o->key != k) return Error{ErrorCode::kMissingObject, "input " + k.to_string()};
    if (o->kind == ObjectKind::kReadOnly) continue;
    if (o->kind != ObjectKind::kOwned) return Error{ErrorCode::kMalformed, "non-owned object in inputs"};
    out.push_back(*o);
  }
  for (const auto& id : tx.shared_inputs) {
    const auto* o = find(objects, id);
    if (!o) return Error{ErrorCode::kMissingObject, "shared input " + id.short_hex()};
    if (o->kind != ObjectKind::kShared) return Error{ErrorCode::kMalformed, "shared input is not shared"};
    out.push_back(*o);
  }
  return out;
}

ExecOutput finish(const Digest& tx_digest, std::vector<Object> touched, std::vector<Object> created) {
  ExecOutput out;
  out.effects.tx_digest = tx_digest;
  std::sort(touched.begin(), touched.end(), [](const Object& a, const Object& b) { return a.key < b.key; });
  for (auto& o : touched) {
    out.effects.consumed.push_back(o.key);
    o.key = o.key.next();
    out.written.push_back(std::move(o));
  }
  for (auto& o : created) out.written.push_back(std::move(o));
  std::sort(out.written.begin(), out.written.end(), [](const Object& a, const Object& b) { return a.key < b.key; });
  for (const auto& o : out.written) out.effects.produced.push_back(ObjectRef{o.key, o.digest()});
  return out;
}

}  // namespace

Result<ExecOutput> execute(const Transaction& tx, const std::map<ObjectId, Object>& objects) {
  auto structure = tx.check_structure();
  if (!structure) return structure.error();
  auto gathered = gather_mutable(tx, objects);
  if (!gathered) return gathered.error();
  std::vector<Object> touched = std::move(gathered).value();
  auto slot = [&](const ObjectId& id) -> Object* {
    for (auto& o : touched) {
      if (o.key.id == id) return &o;
    }
    return nullptr;
  };

  Object* gas = slot(tx.gas.id);
  if (!gas || gas->kind != ObjectKind::kOwned) return Error{ErrorCode::kMalformed, "gas must be an owned input"};
  if (gas->balance < kGasFee) return Error{ErrorCode::kInsufficientGas, "gas balance " + std::to_string(gas->balance)};

  std::vector<Object> created;
  std::vector<CommutativeOp> ops;
  switch (tx.kind) {
    case TxKind::kTransfer:
      for (auto& o : touched) {
        if (o.kind == ObjectKind::kOwned && o.key.id != tx.gas.id) o.owner = tx.params.recipient;
      }
      break;
    case TxKind::kSwap: {
      std::vector<Object*> pair;
      for (auto& o : touched) {
        if (o.key.id != tx.gas.id) pair.push_back(&o);
      }
      if (pair.size() != 2 || pair[0]->kind != ObjectKind::kOwned || pair[1]->kind != ObjectKind::kOwned) {
        return Error{ErrorCode::kMalformed, "swap needs two owned objects"};
      }
      std::swap(pair[0]->owner, pair[1]->owner);
      break;
    }
    case TxKind::kNoOp:
      break;
    case TxKind::kMint: {
      if (find(objects, tx.params.new_object)) return Error{ErrorCode::kMalformed, "mint target exists"};
      Object o;
      o.key = ObjectKey{tx.params.new_object, 0};
      o.kind = ObjectKind::kOwned;
      o.owner = tx.params.recipient;
      o.balance = tx.params.amount;
      created.push_back(std::move(o));
      break;
    }
    case TxKind::kCredit:
    case TxKind::kDebit: {
      bool credit = tx.kind == TxKind::kCredit;
      if (Object* t = slot(tx.params.target)) {
        if (credit) {
          t->balance += tx.params.amount;
        } else {
          if (t->balance < tx.params.amount) {
            return Error{ErrorCode::kInsufficientBalance,
                         std::to_string(t->balance) + " < " + std::to_string(tx.params.amount)};
          }
          t->balance -= tx.params.amount;
        }
        break;
      }
      auto it = std::find_if(tx.commutative_inputs.begin(), tx.commutative_inputs.end(),
                             [&](const ObjectKey& k) { return k.id == tx.params.target; });
      if (it == tx.commutative_inputs.end()) return Error{ErrorCode::kMalformed, "target is read-only"};
      const auto* c = find(objects, it->id);
      if (!c || c->kind != ObjectKind::kCommutative) return Error{ErrorCode::kMissingObject, "commutative target"};
      if (!credit && (c->crdt == CrdtKind::kGCounter || c->crdt == CrdtKind::kUSet)) {
        return Error{ErrorCode::kMalformed, "grow-only object cannot be debited"};
      }
      ops.push_back(CommutativeOp{*it, tx.kind, tx.params.amount, tx.params.item});
      break;
    }
  }
  gas->balance -= kGasFee;
  auto out = finish(tx.digest(), std::move(touched), std::move(created));
  out.effects.commutative = std::move(ops);
  return out;
}

ExecOutput execute_failed(const Transaction& tx, const std::map<ObjectId, Object>& objects, const Error& why) {
  std::vector<Object> touched;
  for (const auto& k : tx.inputs) {
    const auto* o = find(objects, k.id);
    if (o && o->key == k && o->kind == ObjectKind::kOwned) touched.push_back(*o);
  }
  for (const auto& id : tx.shared_inputs) {
    const auto* o = find(objects, id);
    if (o && o->kind == ObjectKind::kShared) touched.push_back(*o);
  }
  auto out = finish(tx.digest(), std::move(touched), {});
  out.effects.status = ExecStatus::kFailed;
  out.effects.failure = std::string(to_string(why.code));
  return out;
}

ExecOutput execute_noop(const Digest& tx_digest, const std::vector<Object>& objects) {
  std::vector<Object> touched;
  for (const auto& o : objects) {
    if (is_mutable(o)) touched.push_back(o);
  }
  return finish(tx_digest, std::move(touched), {});
}

}  // namespace fpl
