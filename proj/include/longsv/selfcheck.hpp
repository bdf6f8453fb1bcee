// Copyright 2026 The longsv Authors.
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

#include <string>
#include <vector>

namespace longsv {

struct CheckResult {
  std::string name;
  bool ok = false;
  std::string detail;
};

// Fast built-in diagnostics: gradient spot checks, error-rate metrics against
// a brute-force oracle, and the adapter identity property. Runs in seconds;
// the full test suites cover the same ground much more thoroughly.
std::vector<CheckResult> run_selftests();

}  // namespace longsv
