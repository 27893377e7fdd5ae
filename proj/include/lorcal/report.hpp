/** @file report.hpp
 *  @brief Deterministic JSON summaries and full-precision CSV tables.
 */
#pragma once

#include <charconv>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "acceptance.hpp"
#include "errors.hpp"
#include "json.hpp"

namespace lorcal::report {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Shortest-free, locale-independent rendering with 17 significant digits.
inline std::string num(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline std::string fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i, h >>= 4) buf[i] = hex[h & 15];
  buf[16] = 0;
  return buf;
}

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<double>& v) {
    if (v.size() != header_.size()) throw ConfigError("csv: row width does not match header");
    rows_.push_back(v);
  }
  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < header_.size(); ++i) s += (i ? "," : "") + header_[i];
    s += "\n";
    for (auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + num(r[i]);
      s += "\n";
    }
    return s;
  }
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

/// Wraps a result object with the resolved config, its hash, the seed and the version.
inline json envelope(const std::string& command, const json& config, unsigned long long seed, const json& result) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["config"] = config;
  j["config_hash"] = fnv1a(config.dump());
  j["result"] = result;
  return j;
}

inline json to_json(const acceptance::Criterion& c) {
  json j;
  j["id"] = c.id;
  j["title"] = c.title;
  j["pass"] = c.pass;
  json m = json::object();
  for (auto& [k, v] : c.metrics) m[k] = v;
  j["metrics"] = m;
  return j;
}

inline json to_json(const std::vector<acceptance::Criterion>& cs) {
  json a = json::array();
  for (auto& c : cs) a.push_back(to_json(c));
  return a;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  f << text;
  if (!f) throw IoError("write failed for " + p.string());
}

}  // namespace lorcal::report
