/*
 * Copyright (c) 2026, kgrec authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace kgrec {

// Base of every error thrown by the library. error_class() is the stable,
// machine-parseable name printed by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string error_class, const std::string& what)
      : std::runtime_error(what), error_class_(std::move(error_class)) {}

  const std::string& error_class() const noexcept { return error_class_; }

 private:
  std::string error_class_;
};

#define KGREC_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

KGREC_DEFINE_ERROR(ConfigError);
KGREC_DEFINE_ERROR(SignatureError);
KGREC_DEFINE_ERROR(LookupError);
KGREC_DEFINE_ERROR(FormatError);
KGREC_DEFINE_ERROR(SamplingError);
KGREC_DEFINE_ERROR(NumericError);
KGREC_DEFINE_ERROR(EvaluationError);
KGREC_DEFINE_ERROR(LeakageError);
KGREC_DEFINE_ERROR(IoError);
KGREC_DEFINE_ERROR(ContractError);

#undef KGREC_DEFINE_ERROR

}  // namespace kgrec
