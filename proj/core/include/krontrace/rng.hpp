// Copyright 2026 The krontrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>

namespace krontrace {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Counter-based random stream keyed by (base_seed, stream_id).
///
/// Draw n of a stream is mix64(key + (n + 1) * 0x9E3779B97F4A7C15) with
/// key = mix64(base_seed ^ mix64(stream_id)), i.e. SplitMix64 run in counter
/// mode. The sequence is a pure function of the key pair, so streams can be
/// assigned to samples up front and evaluated in any order or on any thread.
///
/// Normals use Box-Muller rather than std::normal_distribution, whose output
/// is implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t base_seed, std::uint64_t stream_id);

  std::uint64_t base_seed() const { return base_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t position() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform on (0, 1], 53 bits.
  double uniform();
  double normal();
  /// +1 or -1 with equal probability.
  double rademacher();

 private:
  std::uint64_t base_seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_normal_;
};

}  // namespace krontrace
