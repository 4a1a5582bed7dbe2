/* Copyright 2026 The Stageplan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef STAGEPLAN_ERRORS_H_
#define STAGEPLAN_ERRORS_H_

#include <stdexcept>
#include <string>

namespace stageplan {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  kInput = 2,       // malformed files, missing keys, bad arguments
  kInfeasible = 3,  // no plan / placement can satisfy the configuration
  kMismatch = 4,    // plan does not match the graph it is replayed against
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what)
      : Error(ErrorKind::kInput, what) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what)
      : Error(ErrorKind::kInfeasible, what) {}
};

class MismatchError : public Error {
 public:
  explicit MismatchError(const std::string& what)
      : Error(ErrorKind::kMismatch, what) {}
};

}  // namespace stageplan

#endif  // STAGEPLAN_ERRORS_H_
