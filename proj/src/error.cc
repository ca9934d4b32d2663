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

#include "bsrnn/error.h"

namespace bsrnn {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kIo: return "I/O";
    case ErrorKind::kLength: return "length";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kScheme: return "scheme";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kSimulation: return "simulation";
    case ErrorKind::kCatalog: return "catalog";
    case ErrorKind::kMetric: return "metric";
    case ErrorKind::kAdapter: return "adapter";
    case ErrorKind::kCheckpoint: return "checkpoint";
  }
  return "unknown";
}

}  // namespace bsrnn
