#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpl/validator.hpp"

namespace fpl::sim {

struct NetworkModel {
  Tick min_delay = 1;
  Tick max_delay = 10;
  std::uint64_t drop_budget = 0;  // total messages that may be lost
  double drop_rate = 0.0;         // chance per client/validator message while budget lasts
  bool reorder = true;            // false keeps each channel FIFO
};

struct SequencerModel {
  Tick min_delay = 5;  // submission to ordering
  Tick max_delay = 20;
  std::map<ValidatorId, Tick> lag;                // extra delivery delay per validator
  std::map<ValidatorId, Tick> submit_lag;         // extra delay on a validator's submissions
  std::vector<std::pair<Tick, Tick>> outages;     // [from, until) with ordering paused
};

struct FaultSpec {
  ValidatorId validator = 0;
  Behavior behavior = Behavior::kHonest;
  std::optional<Tick> crash_at;
};

struct OwnerSpec {
  AuthTerm term;
  std::set<std::string> holders;  // every user named in the term
};

struct ObjectSpec {
  std::string label;
  ObjectKind kind = ObjectKind::kOwned;
  CrdtKind crdt = CrdtKind::kNone;
  std::optional<OwnerSpec> owner;
  std::int64_t balance = 0;
};

struct ActionSpec {
  std::string id;
  std::string kind;  // the "do" field
  std::optional<Tick> at;
  std::vector<std::string> after;
  Tick delay = 0;
  std::vector<std::string> if_status;  // fire only if some `after` action ended in one of these
  nlohmann::json args;
};

struct Scenario {
  std::string name;
  CommitteeParams params;
  std::uint64_t seed = 0;
  Tick delta = 100;
  Tick epoch_length = 2000;
  Tick max_ticks = 100000;
  Tick timeout = 50;
  NetworkModel network;
  SequencerModel sequencer;
  std::vector<FaultSpec> faults;
  std::map<ValidatorId, Tick> skew;
  std::vector<ObjectSpec> objects;
  std::vector<ActionSpec> script;
  nlohmann::json source;

  Digest digest() const;
  const ObjectSpec* object(const std::string& label) const;
  const ActionSpec* action(const std::string& id) const;
  Behavior behavior(ValidatorId v) const;
};

// Object ids are derived from labels.
ObjectId label_id(const std::string& label);

// Parses "X" or "X@v". The version is absent for a plain label.
std::pair<std::string, std::optional<Version>> parse_key_ref(const std::string& ref);

// kMalformed with a description of the first schema violation.
Result<Scenario> parse_scenario(const nlohmann::json& doc);
Result<Scenario> load_scenario(const std::filesystem::path& path);

}  // namespace fpl::sim
