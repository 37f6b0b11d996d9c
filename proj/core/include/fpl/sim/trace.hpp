#pragma once

#include <istream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpl/result.hpp"

namespace fpl::sim {

// One event per record. Every record starts with tick, actor and kind;
// the remaining fields depend on the kind and keep insertion order.
using Record = nlohmann::ordered_json;

struct Trace {
  std::vector<Record> records;

  // Line-delimited JSON, one record per line, trailing newline.
  std::string jsonl() const;
  static Result<Trace> parse(std::istream& in);
  static Result<Trace> parse(const std::string& text);
};

}  // namespace fpl::sim
