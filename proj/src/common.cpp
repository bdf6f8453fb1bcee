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

#include "longsv/common.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace longsv {

const char* err_name(Err code) {
  switch (code) {
    case Err::NotFound: return "NotFound";
    case Err::UnsupportedChannels: return "UnsupportedChannels";
    case Err::UnsupportedEncoding: return "UnsupportedEncoding";
    case Err::IoError: return "IoError";
    case Err::TooShort: return "TooShort";
    case Err::DimMismatch: return "DimMismatch";
    case Err::BadRange: return "BadRange";
    case Err::DegenerateNoise: return "DegenerateNoise";
    case Err::DegenerateClean: return "DegenerateClean";
    case Err::RateMismatch: return "RateMismatch";
    case Err::EmptyPool: return "EmptyPool";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::NonScalarLoss: return "NonScalarLoss";
    case Err::MissingBias: return "MissingBias";
    case Err::SpawnFailed: return "SpawnFailed";
    case Err::ProtocolError: return "ProtocolError";
    case Err::ChildNonzeroExit: return "ChildNonzeroExit";
    case Err::TooFewSpeakers: return "TooFewSpeakers";
    case Err::EmptyManifest: return "EmptyManifest";
    case Err::BadMagic: return "BadMagic";
    case Err::VersionMismatch: return "VersionMismatch";
    case Err::InsufficientSpeakers: return "InsufficientSpeakers";
    case Err::ZeroVector: return "ZeroVector";
    case Err::DegenerateLabels: return "DegenerateLabels";
    case Err::MissingEmbedding: return "MissingEmbedding";
    case Err::BadLabel: return "BadLabel";
    case Err::ParseError: return "ParseError";
    case Err::UnknownKey: return "UnknownKey";
    case Err::InvalidValue: return "InvalidValue";
  }
  return "Unknown";
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  size_t workers = std::min<size_t>(size_t(jobs), n);
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace longsv
