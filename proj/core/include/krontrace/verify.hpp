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

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace krontrace {

enum class VerifyDepth { Fast, Full };

VerifyDepth parse_verify_depth(std::string_view name);

struct VerifyItem {
  std::string name;
  bool passed = false;
  /// Worst observed deviation, in the same units as `tolerance`.
  double worst_deviation = 0.0;
  double tolerance = 0.0;
  std::size_t cases = 0;
  double seconds = 0.0;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyItem> items;
  double seconds = 0.0;

  bool passed() const;
  std::size_t failures() const;
};

/// Runs the cross-module invariant battery with fixed seeds. Failures are
/// report entries, never exceptions.
VerifyReport verify_suite(VerifyDepth depth);

/// One line per item, then a summary line.
void print_report(const VerifyReport& report, std::ostream& out);

}  // namespace krontrace
