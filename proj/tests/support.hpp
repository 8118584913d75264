#pragma once

#include <string>

#include "hmpc/config.hpp"

namespace hmpc::test {

inline std::string config_path(const std::string& name) { return shipped_config_dir() + "/" + name + ".yaml"; }

inline Config scenario_config(const std::string& name) {
  Config c = load_config(config_path(name));
  c.ingredients = std::string(HMPC_TEST_CACHE) + "/terminal_ingredients.txt";
  return c;
}

// Default-config ingredients, designed once per build tree and cached there.
inline const TerminalIngredients& ingredients() {
  static const TerminalIngredients ti = obtain_ingredients(scenario_config("default"));
  return ti;
}

}  // namespace hmpc::test
