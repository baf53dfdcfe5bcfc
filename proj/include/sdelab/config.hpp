#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdelab {

// Flat key=value configuration: one `key = value` per line, `#` comments,
// dotted section prefixes. Keys keep file order for the provenance echo.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
  }

  static Config from_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("config: line " + std::to_string(lineno) +
                                 " is not `key = value`");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw std::runtime_error("config: empty key on line " +
                                 std::to_string(lineno));
      cfg.set(key, value);
    }
    return cfg;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw std::runtime_error("config: missing key `" + key + "`");
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return parse_double(key, get(key)); }

  double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long get_long(const std::string& key) const {
    const std::string v = get(key);
    std::size_t pos = 0;
    long out = 0;
    try {
      out = std::stol(v, &pos);
    } catch (const std::exception&) {
      throw std::runtime_error("config: key `" + key + "` is not an integer");
    }
    if (pos != v.size())
      throw std::runtime_error("config: key `" + key + "` is not an integer");
    return out;
  }

  long get_long_or(const std::string& key, long fallback) const {
    return has(key) ? get_long(key) : fallback;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    std::istringstream in(get(key));
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(parse_double(key, trim(tok)));
    if (out.empty())
      throw std::runtime_error("config: key `" + key + "` has no values");
    return out;
  }

  // Rejects any key outside the allowed set; the caller names every key it
  // understands so typos fail loudly.
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& k : order_)
      if (!allowed.count(k))
        throw std::runtime_error("config: unknown key `" + k + "`");
  }

  const std::vector<std::string>& keys() const { return order_; }

  // FNV-1a over the canonical `key = value` lines; echoed into outputs so a
  // CSV can be traced back to the exact configuration that produced it.
  std::uint64_t content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& k : order_) {
      const std::string line = k + " = " + values_.at(k) + "\n";
      for (unsigned char ch : line) {
        h ^= ch;
        h *= 0x100000001b3ull;
      }
    }
    return h;
  }

  void write_echo(std::ostream& out) const {
    for (const auto& k : order_) out << "# " << k << " = " << values_.at(k) << "\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(content_hash()));
    out << "# config-hash = " << buf << "\n";
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  double parse_double(const std::string& key, const std::string& v) const {
    std::size_t pos = 0;
    double out = 0.0;
    try {
      out = std::stod(v, &pos);
    } catch (const std::exception&) {
      throw std::runtime_error("config: key `" + key + "` is not a number");
    }
    // allow simple fractions like 4/5
    if (pos != v.size()) {
      if (v[pos] == '/') {
        const std::string den = v.substr(pos + 1);
        std::size_t dpos = 0;
        const double dd = std::stod(den, &dpos);
        if (dpos == den.size() && dd != 0.0) return out / dd;
      }
      throw std::runtime_error("config: key `" + key + "` is not a number");
    }
    return out;
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

}  // namespace sdelab
