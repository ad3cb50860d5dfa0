// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace evattr::cli {

/// Column-aligned text and CSV rendering of small result tables.
class Table {
 public:
  explicit Table(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);

  /// Space-padded columns, suitable for terminals and report files.
  std::string aligned() const;

  /// Comma-separated with the header row first. Cells are expected to be
  /// plain numbers or identifiers (no quoting is performed).
  std::string csv() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Number formatting shared by the report writers: fixed-ish for
/// moderate magnitudes, scientific for tails, "inf"/"-inf" for infinite
/// values.
std::string format_number(double v);

/// Full-precision rendering for machine-readable outputs.
std::string format_exact(double v);

}  // namespace evattr::cli
