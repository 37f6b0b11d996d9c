#include "fpl/sequencer.hpp"

namespace fpl {

Result<Unit> check_item(const SequencedPayload& payload, const Committee& committee) {
  if (const auto* u = std::get_if<UnlockCert>(&payload)) {
    if (auto ok = u->rqt.check_structure(); !ok) return Error{ErrorCode::kInvalidItem, ok.error().detail};
    if (auto ok = verify_unlock_cert(*u, committee); !ok) return Error{ErrorCode::kInvalidItem, ok.error().detail};
    return Unit{};
  }
  if (const auto* c = std::get_if<Certificate>(&payload)) {
    if (auto ok = c->tx.check_structure(); !ok) return Error{ErrorCode::kInvalidItem, ok.error().detail};
    if (!verify_certificate(*c, committee)) return Error{ErrorCode::kInvalidItem, "certificate does not verify"};
    return Unit{};
  }
  const auto& eoe = std::get<EndOfEpoch>(payload);
  if (eoe.sig.signer != eoe.validator || !committee.verify(eoe.sig, eoe.message())) {
    return Error{ErrorCode::kInvalidItem, "end-of-epoch signature"};
  }
  return Unit{};
}

Result<std::optional<std::uint64_t>> Sequencer::submit(SequencedPayload payload) {
  if (auto ok = check_item(payload, *committee_); !ok) return ok.error();
  if (!seen_.insert(content_digest(payload)).second) return std::optional<std::uint64_t>{};
  if (!live_) {
    held_.push_back(std::move(payload));
    return std::optional<std::uint64_t>{};
  }
  return std::optional<std::uint64_t>{order(std::move(payload))};
}

std::vector<std::uint64_t> Sequencer::set_live(bool live) {
  live_ = live;
  std::vector<std::uint64_t> out;
  if (!live_) return out;
  while (!held_.empty()) {
    out.push_back(order(std::move(held_.front())));
    held_.pop_front();
  }
  return out;
}

std::uint64_t Sequencer::order(SequencedPayload payload) {
  auto seq = static_cast<std::uint64_t>(log_.size()) + 1;
  log_.push_back(SequencedItem{seq, std::move(payload)});
  return seq;
}

}  // namespace fpl
