#pragma once

#include "kged/errors.hpp"

#include <json.hpp>

#include <functional>
#include <set>
#include <string>

namespace kged::detail {

// Reads known fields out of an object and rejects the rest.
class Reader {
 public:
  Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw UsageError(where() + "must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.emplace(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError(where() + "'" + key + "' has the wrong type");
    }
  }

  void object(const char* key, const std::function<void(Reader&)>& body) {
    seen_.emplace(key);
    if (!j_.contains(key)) return;
    Reader sub(j_.at(key), path_ + key + ".");
    body(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw UsageError("unknown config key '" + path_ + it.key() + "'");
  }

 private:
  std::string where() const { return "config" + (path_.empty() ? std::string() : " '" + path_ + "'") + ": "; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace kged::detail
