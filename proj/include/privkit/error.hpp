// Copyright 2026 The PrivKit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace privkit {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (shape mismatch, bad k, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class RegistrationError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A backend or loss produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {

[[noreturn]] inline void contract_failure(const std::string& what) {
  throw ContractViolation(what);
}

}  // namespace detail

#define PRIVKIT_REQUIRE(cond, msg)                          \
  do {                                                      \
    if (!(cond)) ::privkit::detail::contract_failure(msg);  \
  } while (false)

}  // namespace privkit
