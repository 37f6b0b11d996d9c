#pragma once

#include <cassert>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace fpl {

// Protocol-level rejection reasons. These are expected outcomes of message
// handling (a validator refusing a conflicting transaction is not a bug), so
// they travel as values. Contract violations by the caller throw instead.
enum class ErrorCode {
  kMalformed,
  kConflictingLock,
  kMissingObject,
  kStaleVersion,
  kBadEvidence,
  kObjectUnlocked,
  kWrongEpoch,
  kEpochChanging,
  kInvalidCertificate,
  kAlreadyConfirmed,
  kBadGas,
  kInvalidUnlockCert,
  kInsufficientBalance,
  kInsufficientGas,
  kBudgetExhausted,
  kMalformedPath,
  kInvalidReveal,
  kDepthExceeded,
  kIncomplete,
  kMixedRequests,
  kInvalidItem,
  kInsufficientReplies,
};

std::string_view to_string(ErrorCode code);
ErrorCode error_code_from_string(std::string_view name);

struct Error {
  ErrorCode code;
  std::string detail;

  friend bool operator==(const Error& a, const Error& b) { return a.code == b.code; }
};

// Minimal expected-like carrier; std::expected is not available on every
// toolchain this builds with.
template <class T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Error error) : v_(std::move(error)) {}  // NOLINT(google-explicit-constructor)
  Result(ErrorCode code, std::string detail = {}) : v_(Error{code, std::move(detail)}) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    if (!ok()) throw std::logic_error("Result::value() on error: " + std::string(to_string(error().code)));
    return std::get<T>(v_);
  }
  T& value() & {
    if (!ok()) throw std::logic_error("Result::value() on error: " + std::string(to_string(error().code)));
    return std::get<T>(v_);
  }
  T&& value() && {
    if (!ok()) throw std::logic_error("Result::value() on error: " + std::string(to_string(error().code)));
    return std::get<T>(std::move(v_));
  }
  const T& operator*() const& { return value(); }
  const T* operator->() const { return &value(); }

  const Error& error() const {
    assert(!ok());
    return std::get<Error>(v_);
  }
  ErrorCode code() const { return error().code; }

 private:
  std::variant<T, Error> v_;
};

struct Unit {
  friend bool operator==(Unit, Unit) { return true; }
};

}  // namespace fpl
