#include "options.hpp"

#include <algorithm>
#include <cctype>

#include "bathy/error.hpp"

namespace bathy::cli {

CLI::Option* OptionSet::add_path(const std::string& name, std::string& value, const std::string& help) {
  std::string env = "BATHY_" + name;
  std::transform(env.begin(), env.end(), env.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::toupper(c));
  });
  return add(name, value, help)->envname(env);
}

namespace {

std::string token(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ConfigError("config key '" + key + "' has an unsupported value " + v.dump());
}

}  // namespace

void OptionSet::apply(const nlohmann::json& config) const {
  if (!config.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : config.items()) {
    if (key == "command") {
      if (value != app_->get_name()) {
        throw ConfigError("config was written by '" + token(value, key) + "', not '" + app_->get_name() + "'");
      }
      continue;
    }
    const auto known = std::find_if(render_.begin(), render_.end(), [&](const auto& r) { return r.first == key; });
    if (known == render_.end()) throw ConfigError("unknown config key '" + key + "' for " + app_->get_name());
    CLI::Option* opt = app_->get_option("--" + key);
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& item : value) opt->add_result(token(item, key));
    } else {
      opt->add_result(token(value, key));
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
}

nlohmann::json OptionSet::resolved() const {
  nlohmann::json out = nlohmann::json::object();
  out["command"] = app_->get_name();
  for (const auto& [name, render] : render_) out[name] = render();
  return out;
}

}  // namespace bathy::cli
