// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace csidt {

/// A parsed key-value text document.
///
/// Grammar, one construct per line:
///
///     # comment (also after a value)
///     [section]          section header; sections may repeat
///     key = value        scalar value, surrounding whitespace trimmed
///     key = [a, b, c]    list value
///
/// Keys before the first header belong to an unnamed section "".
struct KvSection {
  std::string name;
  std::vector<std::pair<std::string, std::string>> entries;
  int line = 0;

  const std::string* find(std::string_view key) const;
  std::string get(std::string_view key) const;
  double get_double(std::string_view key) const;
  long long get_int(std::string_view key) const;
  std::vector<double> get_list(std::string_view key) const;
  void set(std::string key, std::string value);
};

struct KvDocument {
  std::vector<KvSection> sections;

  std::vector<const KvSection*> all(std::string_view name) const;
  const KvSection* first(std::string_view name) const;
  KvSection& add(std::string name);
  std::string dump() const;
};

KvDocument parse_kv_text(std::string_view text);

/// Shortest round-trip representation of a double (`%.17g`).
std::string format_double(double v);
std::string format_list(const std::vector<double>& v);
std::vector<double> parse_list(std::string_view value);
double parse_double(std::string_view value);
long long parse_int(std::string_view value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace csidt
