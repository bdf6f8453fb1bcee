// Copyright 2026 longsv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace longsv {

using u32 = uint32_t;
using u64 = uint64_t;

enum class Err {
  NotFound,
  UnsupportedChannels,
  UnsupportedEncoding,
  IoError,
  TooShort,
  DimMismatch,
  BadRange,
  DegenerateNoise,
  DegenerateClean,
  RateMismatch,
  EmptyPool,
  ShapeMismatch,
  NonScalarLoss,
  MissingBias,
  SpawnFailed,
  ProtocolError,
  ChildNonzeroExit,
  TooFewSpeakers,
  EmptyManifest,
  BadMagic,
  VersionMismatch,
  InsufficientSpeakers,
  ZeroVector,
  DegenerateLabels,
  MissingEmbedding,
  BadLabel,
  ParseError,
  UnknownKey,
  InvalidValue,
};

const char* err_name(Err code);

/// Single exception type carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& msg)
      : std::runtime_error(std::string(err_name(code)) + ": " + msg),
        code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool cond, Err code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

/// Runs fn(0..n-1) on up to `jobs` threads (serially when jobs <= 1).
/// Indices are handed out atomically; any exception is rethrown after all
/// workers join, so fn must keep per-index state independent.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn);

}  // namespace longsv
