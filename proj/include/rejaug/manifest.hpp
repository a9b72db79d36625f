#pragma once

#include <rejaug/csv.hpp>

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace rejaug {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A run manifest carries everything needed to reproduce a run bit for bit:
// model, seed, sampler settings, data path and normalization. Two formats are
// accepted: JSON, and a flat `key = value` text with [section] headers.
class RunManifest {
public:
  RunManifest() : doc_(nlohmann::json::object()) {}
  explicit RunManifest(nlohmann::json doc) : doc_(std::move(doc)) {}

  static RunManifest load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    std::stringstream buffer;
    buffer << is.rdbuf();
    const std::string text = buffer.str();
    for (char c : text) {
      if (std::isspace(static_cast<unsigned char>(c))) continue;
      if (c == '{') return RunManifest(parse_json(text, path));
      break;
    }
    return RunManifest(parse_flat(text, path));
  }

  static nlohmann::json parse_json(const std::string& text, const std::string& origin) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }

  // Flat format: `key = value` lines, `[section]` scoping, `#` comments.
  // Values become JSON scalars when they parse as such; comma-separated
  // values become arrays.
  static nlohmann::json parse_flat(const std::string& text, const std::string& origin) {
    nlohmann::json doc = nlohmann::json::object();
    std::istringstream is(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[' && line.back() == ']') {
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + " line " + std::to_string(line_no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + " line " + std::to_string(line_no) + ": empty key");
      nlohmann::json* slot = &doc;
      if (!section.empty()) slot = &doc[section];
      (*slot)[key] = parse_scalar_or_array(value);
    }
    return doc;
  }

  const nlohmann::json& doc() const { return doc_; }
  nlohmann::json& doc() { return doc_; }

  bool has(const std::string& dotted) const { return find(dotted) != nullptr; }

  template <typename T>
  T get(const std::string& dotted) const {
    const nlohmann::json* v = find(dotted);
    if (!v) throw ConfigError("missing config field: " + dotted);
    try {
      return v->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field has wrong type: " + dotted);
    }
  }

  template <typename T>
  T get_or(const std::string& dotted, T fallback) const {
    const nlohmann::json* v = find(dotted);
    if (!v) return fallback;
    try {
      return v->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config field has wrong type: " + dotted);
    }
  }

  // Sorted-key dump; nlohmann objects iterate in key order, so this is a
  // canonical representation for the manifest echo.
  std::string canonical() const { return doc_.dump(2) + "\n"; }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest: " + path);
    os << canonical();
  }

private:
  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static nlohmann::json parse_scalar_or_array(const std::string& value) {
    if (value.find(',') != std::string::npos) {
      nlohmann::json arr = nlohmann::json::array();
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) arr.push_back(parse_scalar_or_array(trim(item)));
      return arr;
    }
    try {
      return nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      return nlohmann::json(value);  // bare string
    }
  }

  const nlohmann::json* find(const std::string& dotted) const {
    const nlohmann::json* cur = &doc_;
    std::size_t pos = 0;
    while (pos <= dotted.size()) {
      const auto dot = dotted.find('.', pos);
      const std::string key = dotted.substr(pos, dot == std::string::npos ? dotted.size() - pos : dot - pos);
      if (!cur->is_object() || !cur->contains(key)) return nullptr;
      cur = &(*cur)[key];
      if (dot == std::string::npos) return cur;
      pos = dot + 1;
    }
    return nullptr;
  }

  nlohmann::json doc_;
};

}  // namespace rejaug
