#include "fpl/sim/trace.hpp"

#include <sstream>

namespace fpl::sim {

std::string Trace::jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

Result<Trace> Trace::parse(std::istream& in) {
  Trace t;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      t.records.push_back(Record::parse(line));
    } catch (const nlohmann::json::exception& e) {
      return Error{ErrorCode::kMalformed, "line " + std::to_string(n) + ": " + e.what()};
    }
  }
  return t;
}

Result<Trace> Trace::parse(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

}  // namespace fpl::sim
