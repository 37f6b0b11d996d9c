#include "fpl/sim/checkers.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>

namespace fpl::sim {

namespace {

using Fields = std::vector<std::string>;

std::string label_of(const std::string& key) { return key.substr(0, key.rfind('@')); }

std::uint64_t version_of(const std::string& key) {
  auto at = key.rfind('@');
  return at == std::string::npos ? 0 : std::stoull(key.substr(at + 1));
}

std::optional<std::uint32_t> validator_of(const Record& r) {
  const auto& actor = r.at("actor").get_ref<const std::string&>();
  if (actor.size() < 2 || actor[0] != 'v') return std::nullopt;
  return static_cast<std::uint32_t>(std::stoul(actor.substr(1)));
}

Fields strings(const Record& r, const char* field) {
  Fields out;
  if (!r.contains(field)) return out;
  for (const auto& x : r.at(field)) out.push_back(x.get<std::string>());
  return out;
}

// Indexed view of a trace shared by every checker.
struct Facts {
  std::uint32_t n = 0, f = 0, q = 0;
  std::int64_t epoch_length = 0;
  bool quiescent = false;
  std::vector<bool> honest;
  std::map<std::string, std::int64_t> counters;   // bounded counter label -> max credit
  std::map<std::string, std::string> contents;    // key -> content digest
  std::vector<const Record*> all;
  std::map<std::string, std::vector<const Record*>> by_kind;
  std::map<std::string, std::set<std::uint32_t>> effect_signers;  // effects digest -> validators
  std::map<std::string, const Record*> effect_record;             // first EffectSign per effects digest
  std::vector<const Record*> finals;

  bool is_honest(const Record& r) const {
    auto v = validator_of(r);
    return v && *v < honest.size() && honest[*v];
  }
  const std::vector<const Record*>& kind(const std::string& k) const {
    static const std::vector<const Record*> none;
    auto it = by_kind.find(k);
    return it == by_kind.end() ? none : it->second;
  }
  bool finalized(const std::string& effects) const {
    auto it = effect_signers.find(effects);
    return it != effect_signers.end() && it->second.size() >= q;
  }
};

Facts index(const Trace& trace) {
  Facts x;
  for (const auto& r : trace.records) {
    x.all.push_back(&r);
    const auto& kind = r.at("kind").get_ref<const std::string&>();
    x.by_kind[kind].push_back(&r);
    if (kind == "ScenarioStart") {
      x.n = r.at("n");
      x.f = r.at("f");
      x.q = r.at("q");
      x.epoch_length = r.at("epoch_length");
      for (const auto& b : r.at("behaviors")) x.honest.push_back(b == "Honest");
      for (const auto& [label, max] : r.at("counters").items()) x.counters[label] = max;
      for (const auto& o : r.at("objects")) x.contents[o.at("key")] = o.at("content");
    } else if (kind == "EffectSign") {
      auto v = validator_of(r);
      const auto& d = r.at("effects").get_ref<const std::string&>();
      if (v) x.effect_signers[d].insert(*v);
      x.effect_record.emplace(d, &r);
      for (const auto& p : r.at("produced")) {
        if (!p.at("content").get<std::string>().empty()) x.contents[p.at("key")] = p.at("content");
      }
    } else if (kind == "FinalState") {
      x.finals.push_back(&r);
    } else if (kind == "ScenarioEnd") {
      x.quiescent = r.at("quiescent");
    }
  }
  return x;
}

bool live_honest(const Facts&, const Record& fin) { return fin.at("honest").get<bool>() && !fin.at("crashed").get<bool>(); }

void client_safety(const Facts& x, Verdict& v) {
  for (const auto& [d, signers] : x.effect_signers) {
    if (signers.size() < x.q) continue;
    const Record& fx = *x.effect_record.at(d);
    const auto& tx = fx.at("tx").get_ref<const std::string&>();
    for (const Record* fin : x.finals) {
      if (!live_honest(x, *fin)) continue;
      bool executed = std::any_of(fin->at("executed").begin(), fin->at("executed").end(), [&](const Record& e) {
        return e.at("tx") == tx && e.at("effects") == d;
      });
      if (!executed) {
        v.violations.push_back(fin->at("actor").get<std::string>() + " lost finalized tx " + tx + " (effects " + d + ")");
        continue;
      }
      for (const auto& p : fx.at("produced")) {
        bool present = std::any_of(fin->at("objects").begin(), fin->at("objects").end(), [&](const Record& o) {
          return o.at("key") == p.at("key") && o.at("state") == p.at("state");
        });
        if (!present) {
          v.violations.push_back(fin->at("actor").get<std::string>() + " lacks " + p.at("key").get<std::string>() +
                                 " produced by finalized tx " + tx);
        }
      }
    }
  }
}

void no_conflicting_execution(const Facts& x, Verdict& v) {
  // ObjectKey -> effects digest of the sequenced execution that consumed it.
  std::map<std::string, std::pair<std::string, std::string>> consumer;
  for (const Record* r : x.all) {
    const auto& kind = r->at("kind").get_ref<const std::string&>();
    if (kind != "SeqExec" && kind != "GasConsumed" && kind != "Consolidated") continue;
    if (!x.is_honest(*r)) continue;
    const auto& fx = r->at("effects").get_ref<const std::string&>();
    for (const auto& k : strings(*r, "keys")) {
      auto [it, fresh] = consumer.emplace(k, std::make_pair(fx, r->at("actor").get<std::string>()));
      if (!fresh && it->second.first != fx) {
        v.violations.push_back(k + " consumed by effects " + it->second.first + " at " + it->second.second + " and " +
                               fx + " at " + r->at("actor").get<std::string>());
      }
    }
  }
}

std::map<std::string, const Record*> unlock_starts(const Facts& x) {
  std::map<std::string, const Record*> out;  // actor -> ClientStart
  for (const Record* r : x.kind("ClientStart")) {
    if (r->at("action") == "unlock") out[r->at("actor")] = r;
  }
  return out;
}

void unlock_availability(const Facts& x, Verdict& v) {
  for (const Record* r : x.kind("ClientDone")) {
    if (r->at("action") != "unlock" || !r->value("authorized", true)) continue;
    const auto& status = r->at("status").get_ref<const std::string&>();
    if (status == "Unauthorized") {
      v.violations.push_back(r->at("actor").get<std::string>() + " authorized unlock refused: " +
                             r->value("detail", std::string()));
    } else if (status == "Pending") {
      if (x.quiescent) {
        v.violations.push_back(r->at("actor").get<std::string>() + " authorized unlock never completed");
      } else {
        v.notes.push_back(r->at("actor").get<std::string>() + " unlock pending at the tick limit");
      }
    }
  }
}

void unlock_liveness(const Facts& x, Verdict& v) {
  for (const Record* r : x.kind("ClientDone")) {
    if (r->at("action") != "unlock" || r->at("status") != "Finalized") continue;
    const auto& actor = r->at("actor").get_ref<const std::string&>();
    if (r->at("elapsed").get<std::int64_t>() > x.epoch_length) {
      v.notes.push_back(actor + " completed after epoch_length; inconclusive");
    }
    for (const auto& k : strings(*r, "noops")) {
      auto next = label_of(k) + "@" + std::to_string(version_of(k) + 1);
      bool found = false;
      for (const Record* e : x.kind("EffectSign")) {
        auto consumed = strings(*e, "consumed");
        if (std::find(consumed.begin(), consumed.end(), k) == consumed.end()) continue;
        for (const auto& p : e->at("produced")) {
          if (p.at("key") != next) continue;
          found = true;
          auto before = x.contents.find(k);
          if (before == x.contents.end() || p.at("content") != before->second) {
            v.violations.push_back(actor + " NoOp changed the contents of " + k);
          }
        }
        if (found) break;
      }
      if (!found) v.violations.push_back(actor + " NoOp of " + k + " did not produce " + next);
    }
  }
}

void starvation_freedom(const Facts& x, Verdict& v) {
  std::set<std::string> unauthorized;
  for (const auto& [actor, r] : unlock_starts(x)) {
    if (!r->value("authorized", true)) unauthorized.insert(r->at("digest").get<std::string>());
  }
  if (unauthorized.empty()) return;
  std::map<std::string, std::set<std::uint32_t>> auto_votes;
  for (const Record* r : x.kind("UnlockVote")) {
    const auto& d = r->at("digest").get_ref<const std::string&>();
    if (!unauthorized.contains(d) || !x.is_honest(*r)) continue;
    if (r->at("detail") == "auto") {
      auto_votes[d].insert(*validator_of(*r));
    } else {
      v.violations.push_back(r->at("actor").get<std::string>() + " voted for unauthorized request " + d + " (" +
                             r->at("detail").get<std::string>() + ")");
    }
  }
  auto check = [&](const std::string& d, const std::string& where) {
    if (!unauthorized.contains(d)) return;
    if (auto_votes[d].size() + x.f < x.q) {
      v.violations.push_back("unlock certificate for unauthorized request " + d + " " + where);
    }
  };
  for (const Record* r : x.kind("UnlockCertAssembled")) check(r->at("rqt"), "assembled by " + r->at("actor").get<std::string>());
  for (const Record* r : x.kind("Sequenced")) {
    if (r->at("item") == "UnlockCert") check(r->at("digest"), "sequenced at " + std::to_string(r->at("seq").get<int>()));
  }
}

void unlock_db_monotonic(const Facts& x, Verdict& v) {
  std::map<std::pair<std::uint32_t, std::string>, bool> confirmed;
  for (const Record* r : x.kind("UnlockDb")) {
    if (!x.is_honest(*r)) continue;
    auto who = *validator_of(*r);
    bool confirm = r->at("detail") == "Confirmed";
    for (const auto& k : strings(*r, "keys")) {
      auto& c = confirmed[{who, k}];
      if (c && !confirm) v.violations.push_back(r->at("actor").get<std::string>() + " moved " + k + " from Confirmed to Unlocked");
      c = c || confirm;
    }
  }
}

void per_key_linearity(const Facts& x, Verdict& v) {
  std::map<std::string, std::pair<std::string, std::string>> across;  // key -> (effects, actor)
  for (const Record* fin : x.finals) {
    if (!live_honest(x, *fin)) continue;
    const auto& actor = fin->at("actor").get_ref<const std::string&>();
    std::map<std::string, std::string> local;
    std::set<std::string> produced;
    for (const auto& o : fin->at("objects")) produced.insert(o.at("key").get<std::string>());
    for (const auto& e : fin->at("executed")) {
      const auto& fx = e.at("effects").get_ref<const std::string&>();
      for (const auto& k : e.at("consumed")) {
        auto key = k.get<std::string>();
        auto [it, fresh] = local.emplace(key, fx);
        if (!fresh && it->second != fx) v.violations.push_back(actor + " consumed " + key + " twice");
        if (!produced.contains(key)) v.violations.push_back(actor + " consumed " + key + " which it never held");
        auto [jt, first] = across.emplace(key, std::make_pair(fx, actor));
        if (!first && jt->second.first != fx) {
          v.violations.push_back(key + " consumed differently at " + jt->second.second + " and " + actor);
        }
      }
    }
  }
}

void version_continuity(const Facts& x, Verdict& v) {
  for (const Record* r : x.kind("EffectSign")) {
    std::map<std::string, std::uint64_t> consumed;
    for (const auto& k : strings(*r, "consumed")) consumed[label_of(k)] = version_of(k);
    for (const auto& p : r->at("produced")) {
      auto k = p.at("key").get<std::string>();
      auto it = consumed.find(label_of(k));
      std::uint64_t want = it == consumed.end() ? 0 : it->second + 1;
      if (version_of(k) != want) {
        v.violations.push_back(r->at("actor").get<std::string>() + " produced " + k + " from version " +
                               (it == consumed.end() ? std::string("none") : std::to_string(it->second)));
      }
    }
  }
}

void gas_conservation(const Facts& x, Verdict& v) {
  std::map<std::string, std::string> by_gas;  // gas key -> request digest
  std::map<std::pair<std::uint32_t, std::string>, int> per_validator;
  for (const Record* r : x.kind("GasConsumed")) {
    if (!x.is_honest(*r)) continue;
    const auto& d = r->at("digest").get_ref<const std::string&>();
    for (const auto& g : strings(*r, "keys")) {
      auto [it, fresh] = by_gas.emplace(g, d);
      if (!fresh && it->second != d) v.violations.push_back("gas " + g + " paid for two requests " + it->second + " and " + d);
      if (++per_validator[{*validator_of(*r), g}] > 1) {
        v.violations.push_back(r->at("actor").get<std::string>() + " consumed gas " + g + " twice");
      }
    }
  }
  for (const Record* r : x.kind("SeqResult")) {
    if (!x.is_honest(*r) || r->at("item") != "UnlockCert") continue;
    const auto& outcome = r->at("outcome").get_ref<const std::string&>();
    if ((outcome == "Executed" || outcome == "Ignored") && r->at("gas").get<std::string>().empty()) {
      v.violations.push_back(r->at("actor").get<std::string>() + " processed request " + r->at("digest").get<std::string>() +
                             " without consuming its gas");
    }
  }
}

void bounded_counter_safety(const Facts& x, Verdict& v) {
  if (x.counters.empty()) return;
  std::map<std::string, std::int64_t> debits, credits;
  for (const auto& [d, signers] : x.effect_signers) {
    if (signers.size() < x.q) continue;
    const Record& fx = *x.effect_record.at(d);
    if (fx.at("status") != "Success") continue;
    for (const auto& op : fx.at("ops")) {
      auto label = label_of(op.at("counter"));
      if (!x.counters.contains(label)) continue;
      (op.at("op") == "Debit" ? debits : credits)[label] += op.at("amount").get<std::int64_t>();
    }
  }
  for (const auto& [label, max] : x.counters) {
    if (debits[label] > max + credits[label]) {
      v.violations.push_back(label + " finalized debits " + std::to_string(debits[label]) + " exceed " +
                             std::to_string(max) + " + credits " + std::to_string(credits[label]));
    }
  }
}

void epoch_safety(const Facts& x, Verdict& v) {
  std::map<std::uint32_t, std::int64_t> epoch;
  for (const Record* r : x.all) {
    const auto& kind = r->at("kind").get_ref<const std::string&>();
    if (!x.is_honest(*r)) continue;
    auto who = *validator_of(*r);
    if (kind == "EpochAdvanced") {
      epoch[who] = r->at("value");
      if (r->at("locks").get<std::uint64_t>() != 0) {
        v.violations.push_back(r->at("actor").get<std::string>() + " kept locks across epoch " +
                               std::to_string(epoch[who]));
      }
    } else if (kind == "CertSigned" && r->at("value").get<std::int64_t>() != epoch[who]) {
      v.violations.push_back(r->at("actor").get<std::string>() + " signed " + r->at("digest").get<std::string>() +
                             " from epoch " + std::to_string(r->at("value").get<std::int64_t>()));
    }
  }

  // seq of the quorum-th end-of-epoch for each epoch, and first sequencing of each tx.
  std::map<std::int64_t, std::set<std::uint32_t>> eoe;
  std::map<std::int64_t, std::uint64_t> closed_at;
  std::map<std::string, std::uint64_t> sequenced;
  for (const Record* r : x.kind("Sequenced")) {
    auto seq = r->at("seq").get<std::uint64_t>();
    const auto& item = r->at("item").get_ref<const std::string&>();
    if (item == "EndOfEpoch") {
      auto e = r->at("epoch").get<std::int64_t>();
      auto& votes = eoe[e];
      votes.insert(r->at("validator").get<std::uint32_t>());
      if (votes.size() == x.q) closed_at.emplace(e, seq);
    } else if (item == "CheckpointCert") {
      sequenced.emplace(r->at("digest"), seq);
    } else {
      for (const auto& c : r->at("carried")) sequenced.emplace(c.get<std::string>(), seq);
    }
  }
  std::set<std::string> reported;
  for (const Record* r : x.kind("EffectSign")) {
    if (r->at("path") != "fast" || !x.finalized(r->at("effects"))) continue;
    const auto& tx = r->at("tx").get_ref<const std::string&>();
    auto closed = closed_at.find(r->at("epoch").get<std::int64_t>());
    if (closed == closed_at.end() || reported.contains(tx)) continue;
    auto seq = sequenced.find(tx);
    if (seq == sequenced.end() || seq->second > closed->second) {
      reported.insert(tx);
      v.violations.push_back("fast-path tx " + tx + " finalized in epoch " + std::to_string(closed->first) +
                             " was not sequenced before the epoch closed");
    }
  }
}

void sequencer_agreement(const Facts& x, Verdict& v) {
  std::uint64_t expect = 1;
  for (const Record* r : x.kind("Sequenced")) {
    auto seq = r->at("seq").get<std::uint64_t>();
    if (seq != expect) v.violations.push_back("sequence number " + std::to_string(seq) + " where " + std::to_string(expect) + " was due");
    expect = seq + 1;
  }
  const std::uint64_t total = expect - 1;
  std::map<std::uint64_t, std::pair<std::string, std::string>> agreed;  // seq -> (fingerprint, actor)
  std::map<std::uint32_t, std::uint64_t> processed;
  for (const Record* r : x.kind("SeqResult")) {
    if (!x.is_honest(*r)) continue;
    ++processed[*validator_of(*r)];
    auto seq = r->at("seq").get<std::uint64_t>();
    auto fp = r->at("outcome").get<std::string>() + "|" + r->at("effects").dump() + "|" + r->at("gas").get<std::string>();
    auto [it, fresh] = agreed.emplace(seq, std::make_pair(fp, r->at("actor").get<std::string>()));
    if (!fresh && it->second.first != fp) {
      v.violations.push_back("seq " + std::to_string(seq) + " resolved differently at " + it->second.second + " and " +
                             r->at("actor").get<std::string>());
    }
  }
  if (!x.quiescent) return;
  for (const Record* fin : x.finals) {
    if (!live_honest(x, *fin)) continue;
    auto who = *validator_of(*fin);
    if (fin->at("parked").get<std::uint64_t>() != 0) {
      v.violations.push_back(fin->at("actor").get<std::string>() + " still has parked items");
    }
    if (processed[who] != total) {
      v.violations.push_back(fin->at("actor").get<std::string>() + " processed " + std::to_string(processed[who]) +
                             " of " + std::to_string(total) + " sequenced items");
    }
  }
}

struct Checker {
  std::string name;
  std::function<void(const Facts&, Verdict&)> run;
};

const std::vector<Checker>& registry() {
  static const std::vector<Checker> checkers = {
      {"client_safety", client_safety},
      {"no_conflicting_execution", no_conflicting_execution},
      {"unlock_availability", unlock_availability},
      {"unlock_liveness", unlock_liveness},
      {"starvation_freedom", starvation_freedom},
      {"unlock_db_monotonic", unlock_db_monotonic},
      {"per_key_linearity", per_key_linearity},
      {"version_continuity", version_continuity},
      {"gas_conservation", gas_conservation},
      {"bounded_counter_safety", bounded_counter_safety},
      {"epoch_safety", epoch_safety},
      {"sequencer_agreement", sequencer_agreement},
  };
  return checkers;
}

}  // namespace

const std::vector<std::string>& checker_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& c : registry()) out.push_back(c.name);
    return out;
  }();
  return names;
}

std::vector<Verdict> check_invariants(const Trace& trace) {
  std::vector<Verdict> out;
  Facts facts;
  std::string broken;
  try {
    facts = index(trace);
  } catch (const std::exception& e) {
    broken = e.what();
  }
  if (broken.empty() && facts.honest.empty()) broken = "trace has no ScenarioStart record";
  for (const auto& c : registry()) {
    Verdict v{c.name, {}, {}};
    if (!broken.empty()) {
      v.violations.push_back("unreadable trace: " + broken);
    } else {
      try {
        c.run(facts, v);
      } catch (const std::exception& e) {
        v.violations.push_back(std::string("malformed record: ") + e.what());
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

bool all_ok(const std::vector<Verdict>& verdicts) {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.ok(); });
}

}  // namespace fpl::sim
