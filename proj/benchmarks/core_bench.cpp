#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "fpl/auth.hpp"
#include "fpl/client.hpp"
#include "fpl/validator.hpp"

namespace {

using namespace fpl;

void BM_TaggedHash(benchmark::State& state) {
  std::vector<std::uint8_t> data(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(tagged_hash("bench", data));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_TaggedHash)->Arg(64)->Arg(1024)->Arg(16384);

// Four validators holding coin A and a gas object for alice.
struct Fixture {
  std::shared_ptr<const Committee> committee;
  std::vector<std::unique_ptr<Validator>> validators;
  ObjectView view;
  Transaction tx;

  explicit Fixture(std::uint32_t n = 4) {
    committee = std::make_shared<const Committee>(Committee::make({n, (n - 1) / 3}).value());
    for (ValidatorId v = 0; v < n; ++v) validators.push_back(std::make_unique<Validator>(v, committee));
    const auto alice = PublicKey::for_user("alice");
    view.add_term(single_key_term(alice), {"alice"});
    for (const char* label : {"A", "gas"}) {
      Object o;
      o.key = {ObjectId::from_label(label), 0};
      o.owner = single_key_owner(alice);
      o.balance = 100;
      for (auto& val : validators) val->add_genesis(o);
      view.add(o);
    }
    tx.kind = TxKind::kTransfer;
    tx.gas = {ObjectId::from_label("gas"), 0};
    tx.inputs = {tx.gas, {ObjectId::from_label("A"), 0}};
    tx.params.recipient = single_key_owner(PublicKey::for_user("bob"));
    tx = sign_transaction(tx, {alice}, view);
  }

  Certificate certify() {
    std::vector<CertSign> votes;
    for (auto& v : validators) votes.push_back(v->process_tx(tx).value());
    return assemble_certificate(tx, votes, *committee).value();
  }
};

void BM_TransactionDigest(benchmark::State& state) {
  Fixture f;
  for (auto _ : state) benchmark::DoNotOptimize(f.tx.digest());
}
BENCHMARK(BM_TransactionDigest);

void BM_VerifyCertificate(benchmark::State& state) {
  Fixture f(static_cast<std::uint32_t>(state.range(0)));
  auto cert = f.certify();
  for (auto _ : state) benchmark::DoNotOptimize(verify_certificate(cert, *f.committee));
}
BENCHMARK(BM_VerifyCertificate)->Arg(4)->Arg(7)->Arg(13);

// One validator signing and then executing a fresh transfer.
void BM_FastPathAtOneValidator(benchmark::State& state) {
  for (auto _ : state) {
    state.PauseTiming();
    Fixture f;
    auto cert = f.certify();
    state.ResumeTiming();
    benchmark::DoNotOptimize(f.validators[0]->process_cert(cert));
  }
}
BENCHMARK(BM_FastPathAtOneValidator);

AuthTerm wide_threshold(int n) {
  std::vector<std::pair<std::uint64_t, AuthTerm>> parts;
  for (int i = 0; i < n; ++i) parts.emplace_back(1, AuthTerm::public_key(PublicKey::for_user("u" + std::to_string(i))));
  return AuthTerm::threshold_of(static_cast<std::uint64_t>(n / 2 + 1), std::move(parts));
}

void BM_AuthProveAndReveal(benchmark::State& state) {
  NonceSource nonces(1);
  const int n = static_cast<int>(state.range(0));
  auto term = attach_nonces(wide_threshold(n), nonces);
  auto root = commit(term).value();
  AuthContext ctx;
  for (int i = 0; i < n; ++i) ctx.signers.insert(PublicKey::for_user("u" + std::to_string(i)));
  for (auto _ : state) {
    auto path = prove(term, ctx);
    auto r = reveal(term, *path);
    benchmark::DoNotOptimize(verify_reveal(root, *r, *path, ctx));
  }
}
BENCHMARK(BM_AuthProveAndReveal)->Arg(3)->Arg(16)->Arg(64);

}  // namespace
