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


#ifndef BSRNN_CLI_COMMANDS_H_
#define BSRNN_CLI_COMMANDS_H_

namespace bsrnn::cli {

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

int Main(int argc, char** argv);

}  // namespace bsrnn::cli

#endif  // BSRNN_CLI_COMMANDS_H_
