#include "fpl/sim/scenario.hpp"

#include <fstream>

namespace fpl::sim {

namespace {

using nlohmann::json;

struct SchemaError {
  std::string what;
};

[[noreturn]] void fail(std::string what) { throw SchemaError{std::move(what)}; }

void expect(bool ok, const std::string& what) {
  if (!ok) fail(what);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(std::string("field '") + key + "' has the wrong type");
  }
}

void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  expect(j.is_object(), where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    expect(ok, "unknown field '" + k + "' in " + where);
  }
}

OwnerSpec parse_owner(const json& j, const std::string& where, const std::set<std::string>& labels);

AuthTerm parse_term(const json& j, std::set<std::string>& holders, const std::string& where,
                    const std::set<std::string>& labels) {
  if (j.is_string()) {
    auto user = j.get<std::string>();
    holders.insert(user);
    return AuthTerm::public_key(PublicKey::for_user(user));
  }
  expect(j.is_object() && j.size() >= 1, where + ": owner must be a user name or an object");
  auto children = [&](const json& list) {
    expect(list.is_array() && !list.empty(), where + ": branch needs a non-empty list");
    std::vector<AuthTerm> out;
    for (const auto& c : list) out.push_back(parse_term(c, holders, where, labels));
    return out;
  };
  if (j.contains("threshold")) {
    only_keys(j, {"threshold", "of"}, where);
    auto k = get_or<std::uint64_t>(j, "threshold", 0);
    auto kids = children(j.at("of"));
    expect(k >= 1 && k <= kids.size(), where + ": threshold out of range");
    std::vector<std::pair<std::uint64_t, AuthTerm>> weighted;
    for (auto& c : kids) weighted.emplace_back(1, std::move(c));
    return AuthTerm::threshold_of(k, std::move(weighted));
  }
  if (j.contains("all")) return AuthTerm::all_of(children(j.at("all")));
  if (j.contains("any")) return AuthTerm::any_of(children(j.at("any")));
  if (j.contains("after")) return AuthTerm::after_time(get_or<Tick>(j, "after", 0));
  if (j.contains("before")) return AuthTerm::before_time(get_or<Tick>(j, "before", 0));
  if (j.contains("object")) {
    auto label = get_or<std::string>(j, "object", "");
    expect(labels.contains(label), where + ": unknown object '" + label + "'");
    return AuthTerm::object_id(label_id(label));
  }
  if (j.contains("event")) {
    return AuthTerm::event_occurred(get_or<std::string>(j, "chain", ""), get_or<std::string>(j, "event", ""));
  }
  fail(where + ": unrecognized owner term");
}

OwnerSpec parse_owner(const json& j, const std::string& where, const std::set<std::string>& labels) {
  OwnerSpec o;
  o.term = parse_term(j, o.holders, where, labels);
  if (auto ok = validate(o.term); !ok) fail(where + ": " + ok.error().detail);
  return o;
}

ObjectKind kind_from(const std::string& s) {
  if (s == "owned") return ObjectKind::kOwned;
  if (s == "shared") return ObjectKind::kShared;
  if (s == "readonly") return ObjectKind::kReadOnly;
  if (s == "commutative") return ObjectKind::kCommutative;
  fail("unknown object kind '" + s + "'");
}

CrdtKind crdt_from(const std::string& s) {
  if (s == "gcounter") return CrdtKind::kGCounter;
  if (s == "uset") return CrdtKind::kUSet;
  if (s == "pnset") return CrdtKind::kPNSet;
  if (s == "bounded_counter") return CrdtKind::kBoundedCounter;
  fail("unknown crdt '" + s + "'");
}

struct ScriptChecker {
  const std::set<std::string>& labels;
  const std::set<std::string>& ids;
  std::string where;

  void label(const json& a, const char* key, bool required = true) const {
    if (!a.contains(key)) {
      expect(!required, where + ": missing '" + key + "'");
      return;
    }
    expect(a.at(key).is_string(), where + ": '" + key + "' must be a label");
    auto [name, v] = parse_key_ref(a.at(key).get<std::string>());
    expect(labels.contains(name), where + ": unknown object '" + name + "'");
  }
  void label_list(const json& a, const char* key, bool required = true) const {
    if (!a.contains(key)) {
      expect(!required, where + ": missing '" + key + "'");
      return;
    }
    expect(a.at(key).is_array() && !a.at(key).empty(), where + ": '" + key + "' must be a non-empty list");
    for (const auto& x : a.at(key)) {
      expect(x.is_string(), where + ": labels are strings");
      auto [name, v] = parse_key_ref(x.get<std::string>());
      expect(labels.contains(name), where + ": unknown object '" + name + "'");
    }
  }
  void id_ref(const json& a, const char* key) const {
    expect(a.contains(key), where + ": missing '" + key + "'");
    const auto& x = a.at(key);
    auto one = [&](const json& s) {
      expect(s.is_string() && ids.contains(s.get<std::string>()), where + ": unknown action in '" + key + "'");
    };
    if (x.is_array()) {
      for (const auto& s : x) one(s);
    } else {
      one(x);
    }
  }
  void users(const json& a, const char* key) const {
    if (!a.contains(key)) return;
    expect(a.at(key).is_array(), where + ": '" + key + "' must be a list of users");
    for (const auto& u : a.at(key)) expect(u.is_string(), where + ": user names are strings");
  }
  void validators(const json& a, std::uint32_t n) const {
    for (const char* key : {"targets", "cert_targets"}) {
      if (!a.contains(key)) continue;
      expect(a.at(key).is_array() && !a.at(key).empty(), where + ": '" + key + "' must be a non-empty list");
      for (const auto& v : a.at(key)) {
        expect(v.is_number_unsigned() && v.get<std::uint32_t>() < n, where + ": target validator out of range");
      }
    }
  }

  void tx(const json& a, const std::string& kind, std::uint32_t n) const {
    static const std::initializer_list<const char*> common = {
        "id", "do", "at", "after", "delay", "if", "inputs", "gas", "to", "signers", "targets", "cert_targets", "salt",
        "epoch", "new", "amount", "target", "item", "shared"};
    only_keys(a, common, where);
    label(a, "gas");
    users(a, "signers");
    validators(a, n);
    if (kind == "transfer" || kind == "swap" || kind == "noop") label_list(a, "inputs");
    if (kind == "transfer" || kind == "mint") expect(a.contains("to") && a.at("to").is_string(), where + ": 'to' user");
    if (kind == "swap") expect(a.at("inputs").size() == 2, where + ": swap takes two inputs");
    if (kind == "mint") {
      expect(a.contains("new") && a.at("new").is_string(), where + ": mint needs 'new'");
    }
    if (kind == "credit" || kind == "debit") {
      label(a, "target");
      label_list(a, "inputs", false);
    }
    if (a.contains("shared")) label_list(a, "shared");
  }
};

bool is_tx_kind(const std::string& k) {
  return k == "transfer" || k == "swap" || k == "noop" || k == "mint" || k == "credit" || k == "debit";
}

Scenario parse(const json& doc) {
  only_keys(doc, {"name", "committee", "seed", "delta", "epoch_length", "max_ticks", "timeout", "network",
                  "sequencer", "faults", "skew", "objects", "script", "description"},
            "scenario");
  Scenario s;
  s.source = doc;
  s.name = get_or<std::string>(doc, "name", "unnamed");
  expect(doc.contains("committee"), "scenario needs 'committee'");
  only_keys(doc.at("committee"), {"n", "f"}, "committee");
  s.params.n = get_or<std::uint32_t>(doc.at("committee"), "n", 4);
  s.params.f = get_or<std::uint32_t>(doc.at("committee"), "f", 1);
  if (auto ok = validate(s.params); !ok) fail("committee: " + ok.error().detail);
  s.seed = get_or<std::uint64_t>(doc, "seed", 0);
  s.delta = get_or<Tick>(doc, "delta", s.delta);
  s.epoch_length = get_or<Tick>(doc, "epoch_length", s.epoch_length);
  s.max_ticks = get_or<Tick>(doc, "max_ticks", s.max_ticks);
  s.timeout = get_or<Tick>(doc, "timeout", s.timeout);
  expect(s.timeout > 0 && s.max_ticks > 0 && s.epoch_length > 0, "timeout, max_ticks and epoch_length are positive");

  if (doc.contains("network")) {
    const auto& n = doc.at("network");
    only_keys(n, {"min_delay", "max_delay", "drop_budget", "drop_rate", "reorder"}, "network");
    s.network.min_delay = get_or<Tick>(n, "min_delay", s.network.min_delay);
    s.network.max_delay = get_or<Tick>(n, "max_delay", s.network.max_delay);
    s.network.drop_budget = get_or<std::uint64_t>(n, "drop_budget", 0);
    s.network.drop_rate = get_or<double>(n, "drop_rate", 0.0);
    s.network.reorder = get_or<bool>(n, "reorder", true);
    expect(s.network.min_delay >= 1 && s.network.max_delay >= s.network.min_delay, "network: 1 <= min_delay <= max_delay");
    expect(s.network.drop_rate >= 0.0 && s.network.drop_rate <= 1.0, "network: drop_rate in [0, 1]");
  }
  auto validator_key = [&](const std::string& k, const std::string& where) {
    try {
      auto v = static_cast<ValidatorId>(std::stoul(k));
      expect(v < s.params.n, where + ": validator out of range");
      return v;
    } catch (const std::logic_error&) {
      fail(where + ": validator keys are numbers");
    }
  };
  if (doc.contains("sequencer")) {
    const auto& q = doc.at("sequencer");
    only_keys(q, {"min_delay", "max_delay", "lag", "submit_lag", "outages"}, "sequencer");
    s.sequencer.min_delay = get_or<Tick>(q, "min_delay", s.sequencer.min_delay);
    s.sequencer.max_delay = get_or<Tick>(q, "max_delay", s.sequencer.max_delay);
    expect(s.sequencer.min_delay >= 1 && s.sequencer.max_delay >= s.sequencer.min_delay,
           "sequencer: 1 <= min_delay <= max_delay");
    if (q.contains("lag")) {
      for (const auto& [k, v] : q.at("lag").items()) s.sequencer.lag[validator_key(k, "sequencer.lag")] = v.get<Tick>();
    }
    if (q.contains("submit_lag")) {
      for (const auto& [k, v] : q.at("submit_lag").items())
        s.sequencer.submit_lag[validator_key(k, "sequencer.submit_lag")] = v.get<Tick>();
    }
    if (q.contains("outages")) {
      for (const auto& o : q.at("outages")) {
        expect(o.is_array() && o.size() == 2, "sequencer.outages entries are [from, until]");
        s.sequencer.outages.emplace_back(o[0].get<Tick>(), o[1].get<Tick>());
      }
    }
  }
  std::set<ValidatorId> faulty;
  if (doc.contains("faults")) {
    for (const auto& f : doc.at("faults")) {
      only_keys(f, {"validator", "behavior", "crash_at"}, "fault");
      FaultSpec spec;
      spec.validator = get_or<ValidatorId>(f, "validator", 0);
      expect(spec.validator < s.params.n, "fault: validator out of range");
      auto b = behavior_from_string(get_or<std::string>(f, "behavior", "Honest"));
      if (!b) fail("fault: " + b.error().detail);
      spec.behavior = *b;
      if (f.contains("crash_at")) spec.crash_at = f.at("crash_at").get<Tick>();
      expect(!faulty.contains(spec.validator), "fault: validator listed twice");
      if (spec.behavior != Behavior::kHonest || spec.crash_at) faulty.insert(spec.validator);
      s.faults.push_back(spec);
    }
  }
  expect(faulty.size() <= s.params.f,
         "faults: " + std::to_string(faulty.size()) + " faulty validators exceed f=" + std::to_string(s.params.f));
  if (doc.contains("skew")) {
    for (const auto& [k, v] : doc.at("skew").items()) s.skew[validator_key(k, "skew")] = v.get<Tick>();
  }

  std::set<std::string> labels;
  expect(doc.contains("objects") && doc.at("objects").is_array(), "scenario needs an 'objects' list");
  for (const auto& o : doc.at("objects")) {
    only_keys(o, {"label", "kind", "crdt", "owner", "balance"}, "object");
    auto label = get_or<std::string>(o, "label", "");
    expect(!label.empty() && label.find('@') == std::string::npos, "object: label must be non-empty without '@'");
    expect(labels.insert(label).second, "object: duplicate label '" + label + "'");
  }
  for (const auto& o : doc.at("objects")) {
    ObjectSpec spec;
    spec.label = o.at("label").get<std::string>();
    spec.kind = kind_from(get_or<std::string>(o, "kind", "owned"));
    spec.balance = get_or<std::int64_t>(o, "balance", 0);
    if (o.contains("crdt")) spec.crdt = crdt_from(o.at("crdt").get<std::string>());
    std::string where = "object '" + spec.label + "'";
    expect((spec.kind == ObjectKind::kCommutative) == (spec.crdt != CrdtKind::kNone),
           where + ": commutative objects, and only they, name a crdt");
    if (spec.kind == ObjectKind::kOwned) {
      expect(o.contains("owner"), where + ": owned objects need an owner");
      spec.owner = parse_owner(o.at("owner"), where, labels);
    } else {
      expect(!o.contains("owner"), where + ": only owned objects have an owner");
    }
    expect(spec.balance >= 0, where + ": negative balance");
    s.objects.push_back(std::move(spec));
  }

  std::set<std::string> ids;
  expect(doc.contains("script") && doc.at("script").is_array(), "scenario needs a 'script' list");
  for (const auto& a : doc.at("script")) {
    expect(a.is_object(), "script entries are objects");
    auto id = get_or<std::string>(a, "id", "");
    expect(!id.empty(), "script: every action needs an 'id'");
    expect(ids.insert(id).second, "script: duplicate id '" + id + "'");
    if (a.value("do", "") == "mint" && a.contains("new")) {
      auto label = a.at("new").get<std::string>();
      expect(labels.insert(label).second, "script: minted label '" + label + "' already exists");
    }
  }
  for (const auto& a : doc.at("script")) {
    ActionSpec act;
    act.id = a.at("id").get<std::string>();
    act.kind = get_or<std::string>(a, "do", "");
    std::string where = "action '" + act.id + "'";
    ScriptChecker check{labels, ids, where};
    if (a.contains("at")) act.at = a.at("at").get<Tick>();
    if (a.contains("after")) {
      check.id_ref(a, "after");
      if (a.at("after").is_array()) {
        for (const auto& x : a.at("after")) act.after.push_back(x.get<std::string>());
      } else {
        act.after.push_back(a.at("after").get<std::string>());
      }
      expect(!act.at, where + ": use 'at' or 'after', not both");
    }
    if (!act.at && act.after.empty()) act.at = 0;
    act.delay = get_or<Tick>(a, "delay", 0);
    if (a.contains("if")) {
      expect(!act.after.empty(), where + ": 'if' needs 'after'");
      for (const auto& x : a.at("if")) act.if_status.push_back(x.get<std::string>());
    }
    const auto& k = act.kind;
    if (is_tx_kind(k)) {
      check.tx(a, k, s.params.n);
    } else if (k == "unlock") {
      only_keys(a, {"id", "do", "at", "after", "delay", "if", "protocol", "keys", "gas", "replacement", "signers",
                    "authorized", "targets", "salt"},
                where);
      const bool many = a.contains("keys") && a.at("keys").is_array() && a.at("keys").size() > 1;
      auto p = get_or<std::string>(a, "protocol", many || a.contains("replacement") ? "multi" : "single");
      expect(p == "single" || p == "multi", where + ": protocol is single or multi");
      check.label_list(a, "keys");
      check.label(a, "gas");
      check.users(a, "signers");
      check.validators(a, s.params.n);
      if (a.contains("replacement")) {
        expect(p == "multi", where + ": only multi unlocks take a replacement");
        const auto& r = a.at("replacement");
        auto rk = get_or<std::string>(r, "do", "");
        expect(is_tx_kind(rk), where + ": replacement must be a transaction");
        ScriptChecker{labels, ids, where + " replacement"}.tx(r, rk, s.params.n);
      }
    } else if (k == "spend") {
      only_keys(a, {"id", "do", "at", "after", "delay", "if", "counter", "total", "unit", "gas", "unlock_gas",
                    "signer", "salt"},
                where);
      check.label(a, "counter");
      check.label(a, "gas");
      check.label(a, "unlock_gas");
      expect(a.contains("signer") && a.at("signer").is_string(), where + ": 'signer' user");
      expect(get_or<std::int64_t>(a, "unit", 1) >= 1 && get_or<std::int64_t>(a, "total", 0) >= 0,
             where + ": unit >= 1 and total >= 0");
    } else if (k == "retry") {
      only_keys(a, {"id", "do", "at", "after", "delay", "if", "of", "unlock", "signers", "targets"}, where);
      check.id_ref(a, "of");
      check.id_ref(a, "unlock");
      check.users(a, "signers");
      check.validators(a, s.params.n);
    } else if (k == "epoch_change" || k == "sequencer_down" || k == "sequencer_up") {
      only_keys(a, {"id", "do", "at", "after", "delay", "if"}, where);
    } else if (k == "crash") {
      only_keys(a, {"id", "do", "at", "after", "delay", "if", "validator"}, where);
      expect(a.contains("validator") && a.at("validator").get<std::uint32_t>() < s.params.n,
             where + ": validator out of range");
      auto v = a.at("validator").get<ValidatorId>();
      faulty.insert(v);
      expect(faulty.size() <= s.params.f, where + ": crashes push faulty validators above f");
    } else {
      fail(where + ": unknown action '" + k + "'");
    }
    act.args = a;
    s.script.push_back(std::move(act));
  }
  return s;
}

}  // namespace

ObjectId label_id(const std::string& label) { return ObjectId::from_label(label); }

std::pair<std::string, std::optional<Version>> parse_key_ref(const std::string& ref) {
  auto at = ref.find('@');
  if (at == std::string::npos) return {ref, std::nullopt};
  try {
    return {ref.substr(0, at), static_cast<Version>(std::stoull(ref.substr(at + 1)))};
  } catch (const std::logic_error&) {
    return {ref, std::nullopt};
  }
}

Digest Scenario::digest() const { return sha256(source.dump()); }

const ObjectSpec* Scenario::object(const std::string& label) const {
  for (const auto& o : objects) {
    if (o.label == label) return &o;
  }
  return nullptr;
}

const ActionSpec* Scenario::action(const std::string& id) const {
  for (const auto& a : script) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

Behavior Scenario::behavior(ValidatorId v) const {
  for (const auto& f : faults) {
    if (f.validator == v) return f.behavior;
  }
  return Behavior::kHonest;
}

Result<Scenario> parse_scenario(const nlohmann::json& doc) {
  try {
    return parse(doc);
  } catch (const SchemaError& e) {
    return Error{ErrorCode::kMalformed, e.what};
  } catch (const nlohmann::json::exception& e) {
    return Error{ErrorCode::kMalformed, e.what()};
  }
}

Result<Scenario> load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return Error{ErrorCode::kMalformed, "cannot read " + path.string()};
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    return Error{ErrorCode::kMalformed, e.what()};
  }
  return parse_scenario(doc);
}

}  // namespace fpl::sim
