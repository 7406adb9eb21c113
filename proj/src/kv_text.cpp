// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

#include "csidt/kv_text.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csidt/error.hpp"

namespace csidt {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
  // Shortest text that parses back to the same double.
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string format_list(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out + "]";
}

double parse_double(std::string_view value) {
  const auto t = trim(value);
  if (t.empty()) throw ConfigError("expected a number, got an empty value");
  // strtod accepts every to_chars output including inf/nan spellings.
  const std::string s(t);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw ConfigError("not a number: '" + s + "'");
  return v;
}

long long parse_int(std::string_view value) {
  const auto t = trim(value);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError("not an integer: '" + std::string(t) + "'");
  }
  return v;
}

std::vector<double> parse_list(std::string_view value) {
  auto t = trim(value);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') {
    throw ConfigError("expected a bracketed list, got '" + std::string(t) + "'");
  }
  t = trim(t.substr(1, t.size() - 2));
  std::vector<double> out;
  while (!t.empty()) {
    const auto comma = t.find(',');
    out.push_back(parse_double(t.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    t = trim(t.substr(comma + 1));
  }
  return out;
}

const std::string* KvSection::find(std::string_view key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return &v;
  return nullptr;
}

std::string KvSection::get(std::string_view key) const {
  if (const auto* v = find(key)) return *v;
  throw ConfigError("section [" + name + "] is missing key '" + std::string(key) + "'");
}

double KvSection::get_double(std::string_view key) const { return parse_double(get(key)); }
long long KvSection::get_int(std::string_view key) const { return parse_int(get(key)); }
std::vector<double> KvSection::get_list(std::string_view key) const {
  return parse_list(get(key));
}

void KvSection::set(std::string key, std::string value) {
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries.emplace_back(std::move(key), std::move(value));
}

std::vector<const KvSection*> KvDocument::all(std::string_view name) const {
  std::vector<const KvSection*> out;
  for (const auto& s : sections)
    if (s.name == name) out.push_back(&s);
  return out;
}

const KvSection* KvDocument::first(std::string_view name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

KvSection& KvDocument::add(std::string name) {
  sections.push_back(KvSection{std::move(name), {}, 0});
  return sections.back();
}

std::string KvDocument::dump() const {
  std::string out;
  for (const auto& s : sections) {
    if (!s.name.empty()) {
      if (!out.empty()) out += '\n';
      out += "[" + s.name + "]\n";
    }
    for (const auto& [k, v] : s.entries) out += k + " = " + v + "\n";
  }
  return out;
}

KvDocument parse_kv_text(std::string_view text) {
  KvDocument doc;
  KvSection* current = nullptr;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string_view::npos) {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      }
      current = &doc.add(std::string(trim(line.substr(1, line.size() - 2))));
      current->line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!current) {
      current = &doc.add("");
      current->line = line_no;
    }
    if (current->find(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" +
                        std::string(key) + "' in [" + current->name + "]");
    }
    current->entries.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return doc;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace csidt
