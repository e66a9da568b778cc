#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace bathy::cli {

// Registers subcommand options and remembers how to render each bound
// variable, so the resolved configuration can be written out and read back.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& value, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, value, help)->capture_default_str();
    render_.emplace_back(name, [&value] { return nlohmann::json(value); });
    return opt;
  }

  // Path-valued option that can also come from BATHY_<NAME>.
  CLI::Option* add_path(const std::string& name, std::string& value, const std::string& help);

  CLI::App* app() const { return app_; }
  bool given(const std::string& name) const { return app_->get_option("--" + name)->count() > 0; }

  // Fills options not given on the command line (or environment) from a
  // resolved-config JSON object. Unknown keys raise ConfigError.
  void apply(const nlohmann::json& config) const;
  nlohmann::json resolved() const;

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<nlohmann::json()>>> render_;
};

}  // namespace bathy::cli
