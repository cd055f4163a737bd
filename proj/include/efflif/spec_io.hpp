#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "efflif/error.hpp"
#include "efflif/network.hpp"

namespace efflif {

// Key-value text with [sections]. Sections may repeat ([layer] appears once
// per layer); keys before the first section are globals. '#' and ';' start
// comments.
struct ini_section {
  std::string name;
  std::size_t line = 0;
  std::vector<std::pair<std::string, std::string>> entries;

  const std::string* find(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return &v;
    return nullptr;
  }
};

struct ini_document {
  ini_section globals;
  std::vector<ini_section> sections;
};

namespace detail {
inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}
}  // namespace detail

inline ini_document parse_ini(std::istream& in, const std::string& origin = "<input>") {
  ini_document doc;
  ini_section* cur = &doc.globals;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto c = raw.find_first_of("#;"); c != std::string::npos) raw.erase(c);
    const std::string s = detail::trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw config_error(origin + ":" + std::to_string(line) + ": unterminated section header");
      doc.sections.push_back({detail::trim(s.substr(1, s.size() - 2)), line, {}});
      cur = &doc.sections.back();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw config_error(origin + ":" + std::to_string(line) + ": expected 'key = value', got '" + s + "'");
    std::string key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw config_error(origin + ":" + std::to_string(line) + ": empty key");
    if (cur->find(key)) throw config_error(origin + ":" + std::to_string(line) + ": duplicate key '" + key + "'");
    cur->entries.emplace_back(std::move(key), detail::trim(s.substr(eq + 1)));
  }
  return doc;
}

/// Typed, strict access to one section: every key must be consumed.
class ini_reader {
 public:
  ini_reader(const ini_section& s, std::string origin) : s_(s), origin_(std::move(origin)) {}

  bool has(const std::string& key) const { return s_.find(key) != nullptr; }

  std::string str(const std::string& key) {
    const auto* v = s_.find(key);
    if (!v) fail("missing key '" + key + "'");
    used_.insert(key);
    return *v;
  }
  std::string str(const std::string& key, const std::string& fallback) { return has(key) ? str(key) : fallback; }

  std::size_t size(const std::string& key) {
    const auto v = str(key);
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) fail("'" + key + "' must be a non-negative integer, got '" + v + "'");
    return out;
  }
  std::size_t size(const std::string& key, std::size_t fallback) { return has(key) ? size(key) : fallback; }

  long long integer(const std::string& key) {
    const auto v = str(key);
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) fail("'" + key + "' must be an integer, got '" + v + "'");
    return out;
  }

  double real(const std::string& key) {
    const auto v = str(key);
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) fail("'" + key + "' must be a number, got '" + v + "'");
    return out;
  }
  double real(const std::string& key, double fallback) { return has(key) ? real(key) : fallback; }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("'" + key + "' must be true or false, got '" + v + "'");
  }

  /// Rejects keys nobody asked for.
  void finish() const {
    for (const auto& [k, v] : s_.entries)
      if (!used_.count(k)) fail("unknown key '" + k + "'");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw config_error(origin_ + ":" + std::to_string(s_.line) + ": [" + s_.name + "] " + what);
  }

 private:
  const ini_section& s_;
  std::string origin_;
  std::set<std::string> used_;
};

inline constexpr const char* network_schema = "efflif-net/1";

inline network_spec parse_network_spec(std::istream& in, const std::string& origin = "<spec>") {
  const auto doc = parse_ini(in, origin);
  {
    ini_reader g(doc.globals, origin);
    const auto schema = g.str("schema", "");
    if (schema != network_schema)
      throw config_error(origin + ": unsupported schema '" + schema + "' (expected " + network_schema + ")");
    g.finish();
  }
  network_spec spec;
  bool have_network = false;
  for (const auto& sec : doc.sections) {
    ini_reader r(sec, origin);
    if (sec.name == "network") {
      if (have_network) r.fail("repeated [network] section");
      have_network = true;
      spec.input_channels = r.size("input_channels");
      spec.input_length = r.size("input_length", 1);
      spec.timesteps = r.size("timesteps", 5);
      spec.lif.lambda = r.real("lambda", 0.5);
      spec.lif.theta = r.real("theta", 1.0);
      spec.lif.reset = parse_reset_mode(r.str("reset", "soft"));
    } else if (sec.name == "layer") {
      layer_spec l;
      const auto kind = r.str("kind");
      if (kind == "dense")
        l.kind = layer_kind::dense;
      else if (kind == "conv1d")
        l.kind = layer_kind::conv1d;
      else
        r.fail("unknown layer kind '" + kind + "'");
      l.out_channels = r.size("out");
      if (l.kind == layer_kind::conv1d) {
        l.kernel = r.size("kernel");
        l.padding = r.size("padding", 0);
      }
      spec.layers.push_back(l);
    } else if (sec.name == "block") {
      block_spec b;
      b.first = r.size("first");
      b.last = r.size("last");
      b.scheme.kind = parse_scheme_kind(r.str("scheme"));
      b.scheme.groups = r.size("groups", 1);
      spec.blocks.push_back(b);
    } else {
      r.fail("unknown section");
    }
    r.finish();
  }
  if (!have_network) throw config_error(origin + ": missing [network] section");
  validate(spec);
  return spec;
}

inline network_spec load_network_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open spec file '" + path + "'");
  return parse_network_spec(f, path);
}

namespace detail {
inline std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace detail

/// Canonical text form; parse_network_spec(write) reproduces the spec.
inline std::string write_network_spec(const network_spec& spec) {
  std::ostringstream os;
  os << "schema = " << network_schema << "\n\n[network]\n"
     << "input_channels = " << spec.input_channels << "\n"
     << "input_length = " << spec.input_length << "\n"
     << "timesteps = " << spec.timesteps << "\n"
     << "lambda = " << detail::format_real(spec.lif.lambda) << "\n"
     << "theta = " << detail::format_real(spec.lif.theta) << "\n"
     << "reset = " << to_string(spec.lif.reset) << "\n";
  for (const auto& l : spec.layers) {
    os << "\n[layer]\nkind = " << (l.kind == layer_kind::dense ? "dense" : "conv1d") << "\nout = " << l.out_channels
       << "\n";
    if (l.kind == layer_kind::conv1d) os << "kernel = " << l.kernel << "\npadding = " << l.padding << "\n";
  }
  for (const auto& b : spec.blocks) {
    os << "\n[block]\nfirst = " << b.first << "\nlast = " << b.last << "\nscheme = " << to_string(b.scheme.kind)
       << "\n";
    if (b.scheme.shares_channels()) os << "groups = " << b.scheme.groups << "\n";
  }
  return os.str();
}

/// FNV-1a 64 of the canonical text.
inline std::uint64_t spec_hash(const network_spec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : write_network_spec(spec)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace efflif
