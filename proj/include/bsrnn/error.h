// Copyright (c) 2026 The bsrnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BSRNN_ERROR_H_
#define BSRNN_ERROR_H_

#include <stdexcept>
#include <string>

namespace bsrnn {

enum class ErrorKind {
  kFormat,
  kIo,
  kLength,
  kParameter,
  kUsage,
  kTraining,
  kScheme,
  kConfig,
  kSimulation,
  kCatalog,
  kMetric,
  kAdapter,
  kCheckpoint,
};

const char* ErrorKindName(ErrorKind kind);

// Single exception type for the library; `kind()` tells callers which
// contract was violated so the CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(ErrorKindName(kind)) + " error: " +
                           what),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

#define BSRNN_CHECK(cond, kind, msg)               \
  do {                                             \
    if (!(cond)) throw ::bsrnn::Error((kind), (msg)); \
  } while (0)

}  // namespace bsrnn

#endif  // BSRNN_ERROR_H_
