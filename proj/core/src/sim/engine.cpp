#include "fpl/sim/engine.hpp"

#include <algorithm>
#include <queue>
#include <random>
#include <variant>

#include "fpl/client.hpp"
#include "fpl/sequencer.hpp"

namespace fpl::sim {

namespace {

using nlohmann::json;

std::string hex16(const Digest& d) { return d.hex().substr(0, 16); }

Digest content_of(Object o) {
  o.key.version = 0;
  return o.digest();
}

const char* status_name(ExecStatus s) { return s == ExecStatus::kSuccess ? "Success" : "Failed"; }

struct VMsg {
  ValidatorId to = 0;
  std::size_t action = 0;
  ClientPayload payload;
};

using Reply = std::variant<Result<CertSign>, Result<CertReply>, Result<UnlockVote>>;

struct CMsg {
  std::size_t action = 0;
  ValidatorId from = 0;
  Reply reply;
};

struct CSeq {
  std::size_t action = 0;
  ValidatorId from = 0;
  SeqResult result;
};

struct CEffect {
  std::size_t action = 0;
  ValidatorId from = 0;
  EffectSign effect;
};

struct SeqSubmit {
  SequencedPayload payload;
  std::string source;
};

struct SeqDeliver {
  ValidatorId to = 0;
  std::uint64_t seq = 0;
};

struct Timer {
  std::size_t action = 0;
};

struct Fire {
  std::size_t action = 0;
};

struct Crash {
  ValidatorId v = 0;
};

struct SeqLive {
  bool live = true;
};

using Body = std::variant<VMsg, CMsg, CSeq, CEffect, SeqSubmit, SeqDeliver, Timer, Fire, Crash, SeqLive>;

struct Event {
  Tick tick = 0;
  Digest tie;
  std::uint64_t order = 0;
  Body body;

  bool operator>(const Event& o) const {
    if (tick != o.tick) return tick > o.tick;
    if (tie != o.tie) return tie > o.tie;
    return order > o.order;
  }
};

enum class Phase : std::uint8_t { kWaiting, kScheduled, kRunning, kDone };

struct ActionState {
  const ActionSpec* spec = nullptr;
  Phase phase = Phase::kWaiting;
  std::string status;
  std::unique_ptr<Driver> driver;
  std::optional<Transaction> tx;
  std::vector<PublicKey> signers;
  bool authorized = true;
  bool timer_armed = false;
  Tick start = 0;
  Epoch epoch_target = 0;  // epoch_change: done once the clients see this epoch
};

Digest payload_digest(const ClientPayload& p) {
  return std::visit(
      [](const auto& x) -> Digest {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Transaction>) return x.digest();
        else if constexpr (std::is_same_v<T, Certificate>) return x.tx_digest();
        else if constexpr (std::is_same_v<T, UnlockRqt>) return x.digest();
        else return x.rqt.digest();
      },
      p);
}

class Engine {
 public:
  Engine(const Scenario& s, std::uint64_t seed)
      : s_(s), seed_(seed), rng_(seed), committee_(std::make_shared<const Committee>(Committee::make(s.params).value())) {}

  RunResult run();

 private:
  // Scheduling.
  void push(Tick at, const Digest& content, std::uint64_t salt, Body body);
  Tick net_delay() { return uniform(s_.network.min_delay, s_.network.max_delay); }
  Tick seq_delay() { return uniform(s_.sequencer.min_delay, s_.sequencer.max_delay); }
  Tick uniform(Tick lo, Tick hi) { return lo + static_cast<Tick>(rng_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  Tick channel_tick(std::uint32_t from, std::uint32_t to, Tick t);
  bool maybe_drop(const std::string& what, const Digest& d, const std::string& from, const std::string& to);

  // Handlers.
  void on(const VMsg& m);
  void on(const CMsg& m);
  void on(const CSeq& m);
  void on(const CEffect& m);
  void on(const SeqSubmit& m);
  void on(const SeqDeliver& m);
  void on(const Timer& m);
  void on(const Fire& m);
  void on(const Crash& m);
  void on(const SeqLive& m);

  void submit(SequencedPayload p, const std::string& source, Tick extra = 0);
  Tick submit_lag(ValidatorId v) const {
    auto it = s_.sequencer.submit_lag.find(v);
    return it == s_.sequencer.submit_lag.end() ? 0 : it->second;
  }
  void ordered(std::uint64_t seq);
  void flush(ValidatorId v);
  void route(ValidatorId v, const SeqResult& r);
  void dispatch(std::size_t a, std::vector<ClientSend> sends);
  void after_driver_step(std::size_t a);
  void arm(std::size_t a);
  void complete(std::size_t a, std::string status);
  void schedule_ready();
  std::vector<Digest> interests(const ActionState& st) const;

  // Script construction.
  void start_action(std::size_t a);
  ObjectKey resolve(const std::string& ref) const;
  std::vector<PublicKey> holders_of(const std::vector<ObjectKey>& keys) const;
  std::vector<PublicKey> users(const json& list) const;
  Transaction build_tx(const json& a, std::size_t index, std::vector<PublicKey>& signers) const;
  DriverOptions options(const json& a) const;

  // Trace.
  Record rec(const std::string& actor, const std::string& kind) const;
  std::string vname(ValidatorId v) const { return "v" + std::to_string(v); }
  std::string cname(std::size_t a) const { return "client:" + actions_[a].spec->id; }
  std::string key(const ObjectKey& k) const;
  Record keys(const std::vector<ObjectKey>& ks) const;
  void record_effect(ValidatorId v, const EffectSign& s, const char* path);
  void record_done(std::size_t a);
  void final_state();

  const Scenario& s_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::shared_ptr<const Committee> committee_;
  std::vector<std::unique_ptr<Validator>> validators_;
  std::vector<bool> crashed_;
  Sequencer sequencer_{committee_};
  ObjectView view_;
  std::vector<ActionState> actions_;
  std::map<ObjectId, std::string> labels_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t order_ = 0;
  std::uint64_t busy_ = 0;  // queued events other than client timers
  Tick now_ = 0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, Tick> channels_;
  std::map<ValidatorId, Tick> last_delivery_;
  std::uint64_t drops_left_ = 0;

  std::set<std::pair<ValidatorId, Digest>> effect_seen_;
  std::map<Digest, std::set<ValidatorId>> effect_votes_;
  std::map<Epoch, std::set<ValidatorId>> advanced_;

  RunResult out_;
};

void Engine::push(Tick at, const Digest& content, std::uint64_t salt, Body body) {
  Encoder e;
  e.digest(content).u64(salt).u64(order_);
  if (!std::holds_alternative<Timer>(body)) ++busy_;
  queue_.push(Event{at, e.hash("fpl/sim/tie"), order_++, std::move(body)});
}

Tick Engine::channel_tick(std::uint32_t from, std::uint32_t to, Tick t) {
  if (s_.network.reorder) return t;
  auto& last = channels_[{from, to}];
  t = std::max(t, last + 1);
  last = t;
  return t;
}

bool Engine::maybe_drop(const std::string& what, const Digest& d, const std::string& from, const std::string& to) {
  if (drops_left_ == 0 || s_.network.drop_rate <= 0.0) return false;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng_) >= s_.network.drop_rate) return false;
  --drops_left_;
  ++out_.dropped;
  auto r = rec("net", "Drop");
  r["message"] = what;
  r["digest"] = hex16(d);
  r["from"] = from;
  r["to"] = to;
  out_.trace.records.push_back(std::move(r));
  return true;
}

Record Engine::rec(const std::string& actor, const std::string& kind) const {
  Record r;
  r["tick"] = now_;
  r["actor"] = actor;
  r["kind"] = kind;
  return r;
}

std::string Engine::key(const ObjectKey& k) const {
  auto it = labels_.find(k.id);
  std::string name = it == labels_.end() ? k.id.short_hex() : it->second;
  return name + "@" + std::to_string(k.version);
}

Record Engine::keys(const std::vector<ObjectKey>& ks) const {
  Record out = Record::array();
  for (const auto& k : ks) out.push_back(key(k));
  return out;
}

void Engine::record_effect(ValidatorId v, const EffectSign& s, const char* path) {
  auto d = s.effects.digest();
  if (!effect_seen_.insert({v, d}).second) return;
  auto r = rec(vname(v), "EffectSign");
  r["tx"] = hex16(s.effects.tx_digest);
  r["effects"] = hex16(d);
  r["status"] = status_name(s.effects.status);
  r["path"] = path;
  r["epoch"] = validators_[v]->epoch();
  r["consumed"] = keys(s.effects.consumed);
  Record produced = Record::array();
  for (const auto& p : s.effects.produced) {
    Record x;
    x["key"] = key(p.key);
    x["state"] = hex16(p.state);
    auto o = std::find_if(s.outputs.begin(), s.outputs.end(), [&](const Object& obj) { return obj.key == p.key; });
    x["content"] = o == s.outputs.end() ? std::string() : hex16(content_of(*o));
    produced.push_back(std::move(x));
  }
  r["produced"] = std::move(produced);
  Record ops = Record::array();
  for (const auto& op : s.effects.commutative) {
    Record x;
    x["counter"] = key(op.counter);
    x["op"] = std::string(to_string(op.kind));
    x["amount"] = op.amount;
    ops.push_back(std::move(x));
  }
  r["ops"] = std::move(ops);
  out_.trace.records.push_back(std::move(r));

  // The shared client view follows every effect that reaches a quorum.
  auto& votes = effect_votes_[d];
  votes.insert(v);
  if (votes.size() == committee_->quorum()) {
    for (const auto& o : s.outputs) view_.add(o);
  }
}

void Engine::submit(SequencedPayload p, const std::string& source, Tick extra) {
  push(now_ + seq_delay() + extra, content_digest(p), 0, SeqSubmit{std::move(p), source});
}

void Engine::on(const SeqSubmit& m) {
  auto r = sequencer_.submit(m.payload);
  if (!r) {
    auto x = rec("seq", "SeqRejected");
    x["digest"] = hex16(content_digest(m.payload));
    x["item"] = std::string(to_string(seq_kind(m.payload)));
    x["source"] = m.source;
    x["detail"] = r.error().detail;
    out_.trace.records.push_back(std::move(x));
    return;
  }
  if (*r) ordered(**r);
}

void Engine::ordered(std::uint64_t seq) {
  const auto& item = sequencer_.at(seq);
  ++out_.sequenced;
  auto x = rec("seq", "Sequenced");
  x["seq"] = seq;
  x["item"] = std::string(to_string(item.kind()));
  x["digest"] = hex16(item.digest());
  if (const auto* u = std::get_if<UnlockCert>(&item.payload)) {
    x["epoch"] = u->rqt.epoch;
    x["keys"] = keys(u->rqt.keys);
    x["gas"] = key(u->rqt.gas);
    x["protocol"] = std::string(to_string(u->rqt.protocol));
    Record carried = Record::array();
    for (const auto& c : u->certs) carried.push_back(hex16(c.tx_digest()));
    x["carried"] = std::move(carried);
  } else if (const auto* c = std::get_if<Certificate>(&item.payload)) {
    x["epoch"] = c->tx.epoch;
    x["keys"] = keys(c->tx.inputs);
  } else {
    const auto& e = std::get<EndOfEpoch>(item.payload);
    x["epoch"] = e.epoch;
    x["validator"] = e.validator;
  }
  out_.trace.records.push_back(std::move(x));
  for (ValidatorId v = 0; v < committee_->size(); ++v) {
    Tick lag = s_.sequencer.lag.contains(v) ? s_.sequencer.lag.at(v) : 0;
    Tick t = std::max(now_ + net_delay() + lag, last_delivery_[v] + 1);
    last_delivery_[v] = t;
    push(t, item.digest(), v, SeqDeliver{v, seq});
  }
}

void Engine::on(const SeqDeliver& m) {
  if (crashed_[m.to]) return;
  auto& val = *validators_[m.to];
  val.set_local_time(now_ + (s_.skew.contains(m.to) ? s_.skew.at(m.to) : 0));
  val.deliver(sequencer_.at(m.seq));
  flush(m.to);
}

void Engine::on(const SeqLive& m) {
  auto x = rec("seq", m.live ? "SequencerUp" : "SequencerDown");
  out_.trace.records.push_back(std::move(x));
  for (auto seq : sequencer_.set_live(m.live)) ordered(seq);
}

void Engine::on(const Crash& m) {
  if (crashed_[m.v]) return;
  crashed_[m.v] = true;
  out_.trace.records.push_back(rec(vname(m.v), "Crash"));
}

void Engine::flush(ValidatorId v) {
  auto& val = *validators_[v];
  bool more = true;
  while (more) {
    more = false;
    for (auto& ev : val.take_events()) {
      auto r = rec(vname(v), ev.kind);
      r["digest"] = ev.digest.is_zero() ? std::string() : hex16(ev.digest);
      r["keys"] = keys(ev.keys);
      Record produced = Record::array();
      for (const auto& p : ev.produced) {
        Record x;
        x["key"] = key(p.key);
        x["state"] = hex16(p.state);
        produced.push_back(std::move(x));
      }
      r["produced"] = std::move(produced);
      r["effects"] = ev.effects.is_zero() ? std::string() : hex16(ev.effects);
      r["detail"] = ev.detail;
      r["value"] = ev.value;
      r["seq"] = ev.seq;
      if (ev.kind == "EpochAdvanced") {
        r["locks"] = val.tables().locks.size();
        auto e = static_cast<Epoch>(ev.value);
        auto& seen = advanced_[e];
        seen.insert(v);
        if (seen.size() >= committee_->validity() && view_.epoch < e) view_.epoch = e;
      }
      out_.trace.records.push_back(std::move(r));
    }
    for (auto& cert : val.take_checkpoint_outbox()) submit(std::move(cert), vname(v), submit_lag(v));
    for (auto& res : val.take_sequenced_results()) route(v, res);
    if (val.epoch_changing()) {
      if (auto eoe = val.end_of_epoch()) {
        submit(*eoe, vname(v), submit_lag(v));
        more = true;
      }
    }
  }
  schedule_ready();
}

std::vector<Digest> Engine::interests(const ActionState& st) const {
  if (!st.driver || st.driver->done()) return {};
  if (auto* f = dynamic_cast<const FastPathDriver*>(st.driver.get())) return {f->digest()};
  if (auto* u = dynamic_cast<const UnlockDriver*>(st.driver.get())) return {u->digest()};
  if (auto* b = dynamic_cast<const BoundedSpendDriver*>(st.driver.get())) return b->interests();
  return {};
}

void Engine::route(ValidatorId v, const SeqResult& res) {
  auto r = rec(vname(v), "SeqResult");
  r["seq"] = res.seq;
  r["item"] = std::string(to_string(res.kind));
  r["digest"] = hex16(res.item);
  r["outcome"] = std::string(to_string(res.outcome));
  Record fx = Record::array();
  for (const auto& s : res.executed) fx.push_back(hex16(s.effects.digest()));
  r["effects"] = std::move(fx);
  r["gas"] = res.gas ? hex16(res.gas->effects.digest()) : std::string();
  r["detail"] = res.detail;
  out_.trace.records.push_back(std::move(r));
  if (res.gas) record_effect(v, *res.gas, "seq");
  for (const auto& s : res.executed) record_effect(v, s, "seq");

  for (std::size_t a = 0; a < actions_.size(); ++a) {
    auto mine = interests(actions_[a]);
    if (mine.empty()) continue;
    auto wants = [&](const Digest& d) { return std::find(mine.begin(), mine.end(), d) != mine.end(); };
    if (wants(res.item)) {
      push(now_ + net_delay(), res.item, a, CSeq{a, v, res});
      continue;
    }
    for (const auto& s : res.executed) {
      if (wants(s.effects.tx_digest)) push(now_ + net_delay(), s.effects.digest(), a, CEffect{a, v, s});
    }
  }
}

void Engine::dispatch(std::size_t a, std::vector<ClientSend> sends) {
  auto client_id = static_cast<std::uint32_t>(committee_->size() + a);
  for (auto& send : sends) {
    if (const auto* uc = std::get_if<UnlockCert>(&send.payload)) {
      auto r = rec(cname(a), "UnlockCertAssembled");
      r["rqt"] = hex16(uc->rqt.digest());
      r["keys"] = keys(uc->rqt.keys);
      r["carried"] = uc->certs.size();
      r["votes"] = uc->votes.size();
      r["authorized"] = actions_[a].authorized;
      out_.trace.records.push_back(std::move(r));
      submit(*uc, cname(a));
      continue;
    }
    auto d = payload_digest(send.payload);
    const char* what = std::holds_alternative<Transaction>(send.payload)   ? "Transaction"
                       : std::holds_alternative<Certificate>(send.payload) ? "Certificate"
                                                                            : "UnlockRqt";
    for (auto v : send.to) {
      ++out_.messages;
      if (maybe_drop(what, d, cname(a), vname(v))) continue;
      Tick t = channel_tick(client_id, v, now_ + net_delay());
      push(t, d, v, VMsg{v, a, send.payload});
    }
  }
}

void Engine::on(const VMsg& m) {
  if (crashed_[m.to]) return;
  auto& val = *validators_[m.to];
  val.set_local_time(now_ + (s_.skew.contains(m.to) ? s_.skew.at(m.to) : 0));
  std::optional<Reply> reply;
  const char* what = "";
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Transaction>) {
          reply = val.process_tx(p);
          what = "CertSign";
        } else if constexpr (std::is_same_v<T, Certificate>) {
          auto r = val.process_cert(p);
          if (r && r->effect) record_effect(m.to, *r->effect, "fast");
          reply = std::move(r);
          what = "CertReply";
        } else if constexpr (std::is_same_v<T, UnlockRqt>) {
          auto r = val.process_unlock_rqt(p);
          if (val.behavior() != Behavior::kVoteWithholder) reply = std::move(r);
          what = "UnlockVote";
        }
      },
      m.payload);
  flush(m.to);
  if (!reply) return;
  ++out_.messages;
  auto d = payload_digest(m.payload);
  if (maybe_drop(what, d, vname(m.to), cname(m.action))) return;
  auto client_id = static_cast<std::uint32_t>(committee_->size() + m.action);
  Tick t = channel_tick(m.to, client_id, now_ + net_delay());
  push(t, d, m.to, CMsg{m.action, m.to, std::move(*reply)});
}

void Engine::on(const CMsg& m) {
  auto& st = actions_[m.action];
  if (!st.driver || st.driver->done()) return;
  std::vector<ClientSend> sends;
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, Result<CertSign>>) sends = st.driver->on_tx_reply(m.from, r);
        else if constexpr (std::is_same_v<T, Result<CertReply>>) sends = st.driver->on_cert_reply(m.from, r);
        else sends = st.driver->on_unlock_reply(m.from, r);
      },
      m.reply);
  dispatch(m.action, std::move(sends));
  after_driver_step(m.action);
}

void Engine::on(const CSeq& m) {
  auto& st = actions_[m.action];
  if (!st.driver || st.driver->done()) return;
  dispatch(m.action, st.driver->on_seq_result(m.from, m.result));
  after_driver_step(m.action);
}

void Engine::on(const CEffect& m) {
  auto& st = actions_[m.action];
  if (!st.driver || st.driver->done()) return;
  dispatch(m.action, st.driver->on_effect(m.from, m.effect));
  after_driver_step(m.action);
}

void Engine::on(const Timer& m) {
  auto& st = actions_[m.action];
  st.timer_armed = false;
  if (!st.driver || st.driver->done()) return;
  auto sends = st.driver->on_timeout(now_);
  bool idle = sends.empty() && busy_ == 0;
  dispatch(m.action, std::move(sends));
  after_driver_step(m.action);
  // With nothing in flight anywhere and nothing to resend, waiting longer
  // cannot change the outcome.
  if (!idle) arm(m.action);
}

void Engine::arm(std::size_t a) {
  auto& st = actions_[a];
  if (st.timer_armed || !st.driver || st.driver->done()) return;
  st.timer_armed = true;
  push(now_ + st.driver->timeout(), Digest::zero(), a, Timer{a});
}

void Engine::after_driver_step(std::size_t a) {
  auto& st = actions_[a];
  if (st.phase != Phase::kRunning) return;
  if (st.driver->done()) {
    complete(a, std::string(to_string(st.driver->status())));
  } else {
    arm(a);
  }
}

void Engine::record_done(std::size_t a) {
  auto& st = actions_[a];
  auto r = rec(cname(a), "ClientDone");
  r["action"] = st.spec->kind;
  r["status"] = st.status;
  ClientSummary sum{st.spec->id, st.spec->kind, st.status, "", 0, 0, st.start, now_ - st.start, 0, 0};
  if (st.driver) {
    sum.detail = st.driver->detail();
    sum.round_trips = st.driver->round_trips();
    sum.retransmits = st.driver->retransmits();
    Record fx = Record::array();
    for (const auto& c : st.driver->certs()) fx.push_back(hex16(c.effects.digest()));
    r["detail"] = sum.detail;
    r["round_trips"] = sum.round_trips;
    r["retransmits"] = sum.retransmits;
    r["effects"] = std::move(fx);
  }
  if (auto* u = dynamic_cast<const UnlockDriver*>(st.driver.get())) {
    r["rqt"] = hex16(u->digest());
    r["noops"] = keys(u->noop_keys());
    r["outcome"] = u->outcome() ? std::string(to_string(*u->outcome())) : std::string();
    r["replacement_applied"] = u->replacement_applied();
    r["authorized"] = st.authorized;
  }
  if (auto* f = dynamic_cast<const FastPathDriver*>(st.driver.get())) {
    r["tx"] = hex16(f->digest());
    r["rejection"] = f->rejection() ? std::string(to_string(*f->rejection())) : std::string();
  }
  if (auto* b = dynamic_cast<const BoundedSpendDriver*>(st.driver.get())) {
    sum.consolidations = b->consolidations();
    sum.spent = b->spent();
    r["spent"] = b->spent();
    r["debits"] = b->debits();
    r["consolidations"] = b->consolidations();
  }
  r["start"] = st.start;
  r["elapsed"] = now_ - st.start;
  out_.trace.records.push_back(std::move(r));
  out_.clients.push_back(std::move(sum));
}

void Engine::complete(std::size_t a, std::string status) {
  auto& st = actions_[a];
  if (st.phase == Phase::kDone) return;
  st.phase = Phase::kDone;
  st.status = std::move(status);
  record_done(a);
  schedule_ready();
}

void Engine::schedule_ready() {
  for (std::size_t a = 0; a < actions_.size(); ++a) {
    auto& st = actions_[a];
    if (st.phase == Phase::kRunning && st.spec->kind == "epoch_change" && view_.epoch >= st.epoch_target) {
      complete(a, "Finalized");
      return;  // complete() rescans
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      auto& st = actions_[a];
      if (st.phase != Phase::kWaiting || st.spec->after.empty()) continue;
      bool ready = true;
      bool matched = st.spec->if_status.empty();
      for (const auto& id : st.spec->after) {
        auto it = std::find_if(actions_.begin(), actions_.end(), [&](const ActionState& o) { return o.spec->id == id; });
        if (it->phase != Phase::kDone) ready = false;
        for (const auto& want : st.spec->if_status) matched = matched || it->status == want;
      }
      if (!ready) continue;
      if (!matched) {
        st.phase = Phase::kDone;
        st.status = "Skipped";
        st.start = now_;
        record_done(a);
        changed = true;
        continue;
      }
      st.phase = Phase::kScheduled;
      push(now_ + st.spec->delay, sha256(st.spec->id), a, Fire{a});
    }
  }
}

ObjectKey Engine::resolve(const std::string& ref) const {
  auto [name, version] = parse_key_ref(ref);
  auto id = label_id(name);
  if (version) return {id, *version};
  auto latest = view_.latest_key(id);
  return latest ? *latest : ObjectKey{id, 0};
}

std::vector<PublicKey> Engine::holders_of(const std::vector<ObjectKey>& ks) const {
  std::set<std::string> names;
  for (const auto& k : ks) {
    const Object* o = view_.at(k);
    if (!o || !o->owner) continue;
    if (const auto* h = view_.holders(*o->owner)) names.insert(h->begin(), h->end());
  }
  std::vector<PublicKey> out;
  for (const auto& n : names) out.push_back(PublicKey::for_user(n));
  return out;
}

std::vector<PublicKey> Engine::users(const json& list) const {
  std::vector<PublicKey> out;
  for (const auto& u : list) out.push_back(PublicKey::for_user(u.get<std::string>()));
  return out;
}

DriverOptions Engine::options(const json& a) const {
  DriverOptions o;
  o.timeout = s_.timeout;
  if (a.contains("targets")) o.targets = a.at("targets").get<std::vector<ValidatorId>>();
  if (a.contains("cert_targets")) o.cert_targets = a.at("cert_targets").get<std::vector<ValidatorId>>();
  return o;
}

Transaction Engine::build_tx(const json& a, std::size_t index, std::vector<PublicKey>& signers) const {
  Transaction tx;
  auto kind = a.at("do").get<std::string>();
  static const std::map<std::string, TxKind> kinds = {{"transfer", TxKind::kTransfer}, {"swap", TxKind::kSwap},
                                                     {"noop", TxKind::kNoOp},         {"mint", TxKind::kMint},
                                                     {"credit", TxKind::kCredit},     {"debit", TxKind::kDebit}};
  tx.kind = kinds.at(kind);
  tx.gas = resolve(a.at("gas").get<std::string>());
  tx.inputs.push_back(tx.gas);
  auto add_input = [&](const std::string& ref) {
    auto k = resolve(ref);
    const ObjectSpec* spec = s_.object(parse_key_ref(ref).first);
    ObjectKind kind = spec ? spec->kind : ObjectKind::kOwned;
    if (kind == ObjectKind::kShared) {
      tx.shared_inputs.push_back(k.id);
    } else if (kind == ObjectKind::kCommutative) {
      tx.commutative_inputs.push_back(k);
    } else if (std::find(tx.inputs.begin(), tx.inputs.end(), k) == tx.inputs.end()) {
      tx.inputs.push_back(k);
    }
  };
  for (const auto& r : a.value("inputs", json::array())) add_input(r.get<std::string>());
  for (const auto& r : a.value("shared", json::array())) add_input(r.get<std::string>());
  if (a.contains("target")) {
    auto ref = a.at("target").get<std::string>();
    tx.params.target = label_id(parse_key_ref(ref).first);
    bool present = std::any_of(tx.inputs.begin(), tx.inputs.end(), [&](const ObjectKey& k) { return k.id == tx.params.target; }) ||
                   std::any_of(tx.commutative_inputs.begin(), tx.commutative_inputs.end(),
                               [&](const ObjectKey& k) { return k.id == tx.params.target; }) ||
                   std::find(tx.shared_inputs.begin(), tx.shared_inputs.end(), tx.params.target) != tx.shared_inputs.end();
    if (!present) add_input(ref);
  }
  if (a.contains("to")) tx.params.recipient = single_key_owner(PublicKey::for_user(a.at("to").get<std::string>()));
  if (a.contains("new")) tx.params.new_object = label_id(a.at("new").get<std::string>());
  tx.params.amount = a.value("amount", std::int64_t{0});
  tx.params.item = a.value("item", std::string());
  tx.params.salt = a.value("salt", static_cast<std::uint64_t>(index + 1));
  tx.epoch = a.value("epoch", view_.epoch);
  signers = a.contains("signers") ? users(a.at("signers")) : holders_of(tx.inputs);
  return sign_transaction(std::move(tx), signers, view_, now_);
}

void Engine::start_action(std::size_t a) {
  auto& st = actions_[a];
  const auto& spec = *st.spec;
  const json& args = spec.args;
  st.start = now_;
  st.phase = Phase::kRunning;
  auto r = rec(cname(a), "ClientStart");
  r["action"] = spec.kind;
  const auto& k = spec.kind;

  if (k == "transfer" || k == "swap" || k == "noop" || k == "mint" || k == "credit" || k == "debit") {
    auto tx = build_tx(args, a, st.signers);
    st.tx = tx;
    r["digest"] = hex16(tx.digest());
    r["keys"] = keys(tx.inputs);
    r["epoch"] = tx.epoch;
    st.driver = std::make_unique<FastPathDriver>(committee_, &view_, std::move(tx), options(args));
  } else if (k == "retry") {
    const auto& of = actions_[static_cast<std::size_t>(
        std::find_if(actions_.begin(), actions_.end(), [&](const ActionState& o) { return o.spec->id == args.at("of"); }) -
        actions_.begin())];
    std::vector<EffectCert> certs;
    auto unlocks = args.at("unlock").is_array() ? args.at("unlock") : json::array({args.at("unlock")});
    for (const auto& id : unlocks) {
      for (const auto& o : actions_) {
        if (o.spec->id == id && o.driver) certs.insert(certs.end(), o.driver->certs().begin(), o.driver->certs().end());
      }
    }
    if (!of.tx) {
      out_.trace.records.push_back(std::move(r));
      complete(a, "Rejected");
      return;
    }
    auto tx = retry_after_unlock(*of.tx, certs);
    tx.epoch = view_.epoch;
    st.signers = args.contains("signers") ? users(args.at("signers")) : of.signers;
    tx = sign_transaction(std::move(tx), st.signers, view_, now_);
    st.tx = tx;
    r["digest"] = hex16(tx.digest());
    r["keys"] = keys(tx.inputs);
    r["epoch"] = tx.epoch;
    st.driver = std::make_unique<FastPathDriver>(committee_, &view_, std::move(tx), options(args));
  } else if (k == "unlock") {
    UnlockRqt rqt;
    for (const auto& ref : args.at("keys")) rqt.keys.push_back(resolve(ref.get<std::string>()));
    std::sort(rqt.keys.begin(), rqt.keys.end());
    rqt.keys.erase(std::unique(rqt.keys.begin(), rqt.keys.end()), rqt.keys.end());
    const bool many = rqt.keys.size() > 1 || args.contains("replacement");
    rqt.protocol = args.value("protocol", std::string(many ? "multi" : "single")) == "multi" ? UnlockProtocol::kMulti
                                                                                          : UnlockProtocol::kSingle;
    rqt.gas = resolve(args.at("gas").get<std::string>());
    rqt.epoch = view_.epoch;
    rqt.salt = args.value("salt", static_cast<std::uint64_t>(a + 1));
    if (args.contains("replacement")) {
      std::vector<PublicKey> ignored;
      rqt.replacement = build_tx(args.at("replacement"), a, ignored);
    }
    st.authorized = args.value("authorized", true);
    if (args.contains("signers")) {
      st.signers = users(args.at("signers"));
    } else {
      std::vector<ObjectKey> owned{rqt.gas};
      if (st.authorized) owned.insert(owned.end(), rqt.keys.begin(), rqt.keys.end());
      st.signers = holders_of(owned);
    }
    rqt = sign_unlock(std::move(rqt), st.signers, view_, now_);
    r["digest"] = hex16(rqt.digest());
    r["keys"] = keys(rqt.keys);
    r["gas"] = key(rqt.gas);
    r["protocol"] = std::string(to_string(rqt.protocol));
    r["authorized"] = st.authorized;
    r["replacement"] = rqt.replacement ? hex16(rqt.replacement->digest()) : std::string();
    st.driver = std::make_unique<UnlockDriver>(committee_, &view_, std::move(rqt), options(args));
  } else if (k == "spend") {
    BoundedSpendDriver::Plan plan;
    plan.counter = label_id(args.at("counter").get<std::string>());
    plan.gas = label_id(args.at("gas").get<std::string>());
    plan.unlock_gas = label_id(args.at("unlock_gas").get<std::string>());
    plan.signer = PublicKey::for_user(args.at("signer").get<std::string>());
    plan.total = args.value("total", std::int64_t{0});
    plan.unit = args.value("unit", std::int64_t{1});
    plan.salt = args.value("salt", static_cast<std::uint64_t>(a + 1));
    r["counter"] = args.at("counter");
    r["total"] = plan.total;
    r["unit"] = plan.unit;
    st.driver = std::make_unique<BoundedSpendDriver>(committee_, &view_, plan, options(args));
  } else if (k == "epoch_change") {
    st.epoch_target = view_.epoch + 1;
    r["epoch"] = st.epoch_target;
    out_.trace.records.push_back(std::move(r));
    for (ValidatorId v = 0; v < committee_->size(); ++v) {
      if (crashed_[v]) continue;
      for (auto& cert : validators_[v]->begin_epoch_change()) submit(std::move(cert), vname(v), submit_lag(v));
      flush(v);
    }
    schedule_ready();
    return;
  } else {
    out_.trace.records.push_back(std::move(r));
    if (k == "crash") on(Crash{args.at("validator").get<ValidatorId>()});
    if (k == "sequencer_down") on(SeqLive{false});
    if (k == "sequencer_up") on(SeqLive{true});
    complete(a, "Done");
    return;
  }
  out_.trace.records.push_back(std::move(r));
  dispatch(a, st.driver->start(now_));
  after_driver_step(a);
}

void Engine::on(const Fire& m) { start_action(m.action); }

void Engine::final_state() {
  for (std::size_t a = 0; a < actions_.size(); ++a) {
    auto& st = actions_[a];
    if (st.phase == Phase::kDone) continue;
    st.status = st.phase == Phase::kRunning ? "Pending" : "NotStarted";
    st.phase = Phase::kDone;
    record_done(a);
  }
  for (ValidatorId v = 0; v < committee_->size(); ++v) {
    const auto& val = *validators_[v];
    const auto& t = val.tables();
    auto r = rec(vname(v), "FinalState");
    r["honest"] = val.behavior() == Behavior::kHonest;
    r["crashed"] = static_cast<bool>(crashed_[v]);
    r["epoch"] = t.epoch;
    r["parked"] = val.parked();
    r["locks"] = t.locks.size();
    Record live = Record::array();
    for (const auto& [id, version] : t.live) {
      const auto& o = t.objects.at(ObjectKey{id, version});
      Record x;
      x["key"] = key(o.key);
      x["state"] = hex16(o.digest());
      x["content"] = hex16(content_of(o));
      live.push_back(std::move(x));
    }
    r["live"] = std::move(live);
    Record objects = Record::array();
    for (const auto& [k, o] : t.objects) {
      Record x;
      x["key"] = key(k);
      x["state"] = hex16(o.digest());
      objects.push_back(std::move(x));
    }
    r["objects"] = std::move(objects);
    Record executed = Record::array();
    for (const auto& [d, fx] : t.executed) {
      Record x;
      x["tx"] = hex16(d);
      x["effects"] = hex16(fx.digest());
      x["status"] = status_name(fx.status);
      x["consumed"] = keys(fx.consumed);
      executed.push_back(std::move(x));
    }
    r["executed"] = std::move(executed);
    Record unlock = Record::array();
    for (const auto& [k, s] : t.unlock) {
      Record x;
      x["key"] = key(k);
      x["state"] = std::string(to_string(s));
      unlock.push_back(std::move(x));
    }
    r["unlock"] = std::move(unlock);
    r["snapshot"] = hex16(val.snapshot_digest());
    out_.trace.records.push_back(std::move(r));
  }
}

RunResult Engine::run() {
  out_.seed = seed_;
  drops_left_ = s_.network.drop_budget;
  for (const auto& o : s_.objects) labels_[label_id(o.label)] = o.label;
  for (const auto& a : s_.script) {
    if (a.args.contains("new")) {
      auto label = a.args.at("new").get<std::string>();
      labels_[label_id(label)] = label;
    }
  }

  // Genesis.
  std::vector<Object> genesis;
  for (const auto& spec : s_.objects) {
    Object o;
    o.key = ObjectKey{label_id(spec.label), 0};
    o.kind = spec.kind;
    o.crdt = spec.crdt;
    o.balance = spec.balance;
    if (spec.owner) {
      AuthTerm term = spec.owner->term;
      if (!term.is_leaf()) {
        Decoder seed(sha256(spec.label).bytes);
        NonceSource nonces(seed.u64());
        term = attach_nonces(std::move(term), nonces);
      }
      o.owner = commit(term).value();
      view_.add_term(term, spec.owner->holders);
    }
    genesis.push_back(o);
    view_.add(o);
  }
  auto add_user = [&](const std::string& u) { view_.add_term(single_key_term(PublicKey::for_user(u)), {u}); };
  for (const auto& a : s_.script) {
    if (a.args.contains("to")) add_user(a.args.at("to").get<std::string>());
    if (a.args.contains("replacement") && a.args.at("replacement").contains("to")) {
      add_user(a.args.at("replacement").at("to").get<std::string>());
    }
  }

  crashed_.assign(committee_->size(), false);
  Record behaviors = Record::array();
  for (ValidatorId v = 0; v < committee_->size(); ++v) {
    ValidatorOptions opts;
    opts.delta = s_.delta;
    opts.behavior = s_.behavior(v);
    opts.event_oracle = [](const std::string&, const std::string&) { return false; };
    validators_.push_back(std::make_unique<Validator>(v, committee_, opts));
    for (const auto& o : genesis) validators_.back()->add_genesis(o);
    behaviors.push_back(std::string(to_string(opts.behavior)));
  }

  auto start = rec("sim", "ScenarioStart");
  start["scenario"] = s_.name;
  start["digest"] = hex16(s_.digest());
  start["seed"] = seed_;
  start["n"] = committee_->size();
  start["f"] = s_.params.f;
  start["q"] = committee_->quorum();
  start["behaviors"] = std::move(behaviors);
  start["delta"] = s_.delta;
  start["epoch_length"] = s_.epoch_length;
  start["max_ticks"] = s_.max_ticks;
  Record counters = Record::object();
  Record objects = Record::array();
  for (const auto& o : genesis) {
    Record x;
    x["key"] = key(o.key);
    x["kind"] = std::string(to_string(o.kind));
    x["content"] = hex16(content_of(o));
    objects.push_back(std::move(x));
    if (o.crdt == CrdtKind::kBoundedCounter) counters[labels_[o.key.id]] = o.balance;
  }
  start["objects"] = std::move(objects);
  start["counters"] = std::move(counters);
  out_.trace.records.push_back(std::move(start));

  for (const auto& f : s_.faults) {
    if (f.crash_at) push(*f.crash_at, Digest::zero(), f.validator, Crash{f.validator});
  }
  for (const auto& [from, until] : s_.sequencer.outages) {
    push(from, Digest::zero(), 0, SeqLive{false});
    push(until, Digest::zero(), 1, SeqLive{true});
  }
  actions_.resize(s_.script.size());
  for (std::size_t a = 0; a < s_.script.size(); ++a) {
    actions_[a].spec = &s_.script[a];
    if (s_.script[a].at) {
      actions_[a].phase = Phase::kScheduled;
      push(*s_.script[a].at, sha256(s_.script[a].id), a, Fire{a});
    }
  }

  out_.quiescent = true;
  while (!queue_.empty()) {
    if (queue_.top().tick > s_.max_ticks) {
      out_.quiescent = false;
      now_ = s_.max_ticks;
      break;
    }
    Event ev = queue_.top();
    queue_.pop();
    if (!std::holds_alternative<Timer>(ev.body)) --busy_;
    now_ = std::max(now_, ev.tick);
    std::visit([&](const auto& b) { on(b); }, ev.body);
  }

  final_state();
  auto end = rec("sim", "ScenarioEnd");
  end["ticks"] = now_;
  end["quiescent"] = out_.quiescent;
  end["messages"] = out_.messages;
  end["dropped"] = out_.dropped;
  end["sequenced"] = out_.sequenced;
  out_.trace.records.push_back(std::move(end));
  out_.ticks = now_;
  return std::move(out_);
}

}  // namespace

const ClientSummary* RunResult::client(const std::string& action) const {
  for (const auto& c : clients) {
    if (c.action == action) return &c;
  }
  return nullptr;
}

RunResult run(const Scenario& scenario, std::optional<std::uint64_t> seed) {
  Engine engine(scenario, seed.value_or(scenario.seed));
  return engine.run();
}

}  // namespace fpl::sim
