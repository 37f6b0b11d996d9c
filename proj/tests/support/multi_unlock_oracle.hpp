#pragma once

// Brute-force oracle for the multi-object unlock on a 4-validator committee.
//
// A transfer of A to bob is certified by everyone, but only the validators in
// `seen` receive the certificate. The owner then runs a multi unlock over
// [A, gas] whose replacement sends A to dave, collecting votes from `voters`.
// Enumerating every (seen, voters) pair with |voters| >= quorum, the oracle
// expects:
//   - the assembled certificate set is non-empty iff seen and voters meet;
//   - when it is empty, the replacement executes and A ends with dave;
//   - when it is not, exactly the carried transfer executes and A ends with bob;
//   - every validator ends with the same live version and contents of A.

#include <bit>
#include <sstream>
#include <string>
#include <vector>

#include "support/harness.hpp"

namespace fpl::test {

struct OracleReport {
  int cases = 0;
  int mismatches = 0;
  std::string first_mismatch;
};

inline std::string mask_str(std::uint32_t m, std::uint32_t n) {
  std::string s = "{";
  for (std::uint32_t i = 0; i < n; ++i) {
    if (m & (1u << i)) s += (s.size() > 1 ? "," : "") + std::to_string(i);
  }
  return s + "}";
}

inline std::string multi_unlock_case(std::uint32_t seen, std::uint32_t voters) {
  Net net({4, 1});
  auto a = net.owned("A", "alice", 10);
  auto gas = net.owned("alice-gas", "alice", 50);
  auto ugas = net.owned("alice-ugas", "alice", 50);
  auto tx = net.transfer({a.key}, gas.key, "bob", "alice", 1);
  auto cert = net.certify(tx, net.all());
  if (!cert) return "transfer not certified";
  for (ValidatorId v = 0; v < 4; ++v) {
    if (seen & (1u << v)) {
      if (!net.v(v).process_cert(*cert)) return "certificate refused";
    }
  }

  net.view().add_term(single_key_term(user("dave")), {"dave"});
  auto replacement = net.transfer({a.key}, gas.key, "dave", "alice", 2);
  auto rqt = net.unlock({a.key, gas.key}, ugas.key, {"alice"}, UnlockProtocol::kMulti, replacement);
  std::vector<ValidatorId> from;
  for (ValidatorId v = 0; v < 4; ++v) {
    if (voters & (1u << v)) from.push_back(v);
  }
  auto votes = net.unlock_votes(rqt, from);
  if (votes.size() != from.size()) return "a voter refused";
  auto ucert = assemble_unlock_cert(votes, *net.committee());
  if (!ucert) return "unlock certificate not assembled";

  const bool meet = (seen & voters) != 0;
  if (ucert->no_commit() == meet) return "certificate set " + std::string(meet ? "empty" : "non-empty");
  if (meet && (ucert->certs.size() != 1 || ucert->certs[0].tx_digest() != tx.digest())) {
    return "carried set is not exactly the transfer";
  }

  auto results = net.sequence(*ucert);
  if (results.size() != 4) return "not every validator processed the unlock";
  const auto expect_owner = single_key_owner(user(meet ? "bob" : "dave"));
  const Digest winner = meet ? tx.digest() : replacement.digest();
  const Digest loser = meet ? replacement.digest() : tx.digest();
  std::optional<Object> first;
  for (ValidatorId v = 0; v < 4; ++v) {
    const Object* live = net.v(v).live_object(a.key.id);
    if (!live) return "A missing at v" + std::to_string(v);
    if (live->owner != expect_owner) return "wrong owner of A at v" + std::to_string(v);
    if (!net.v(v).tables().executed.contains(winner)) return "expected transaction not executed at v" + std::to_string(v);
    if (net.v(v).tables().executed.contains(loser)) return "other transaction executed at v" + std::to_string(v);
    if (!first) {
      first = *live;
    } else if (!(*live == *first)) {
      return "validators disagree on A";
    }
  }
  return "";
}

inline OracleReport run_multi_unlock_oracle() {
  OracleReport r;
  for (std::uint32_t seen = 0; seen < 16; ++seen) {
    for (std::uint32_t voters = 0; voters < 16; ++voters) {
      if (std::popcount(voters) < 3) continue;
      ++r.cases;
      auto why = multi_unlock_case(seen, voters);
      if (!why.empty()) {
        if (r.mismatches++ == 0) {
          r.first_mismatch = "seen=" + mask_str(seen, 4) + " voters=" + mask_str(voters, 4) + ": " + why;
        }
      }
    }
  }
  return r;
}

}  // namespace fpl::test
