#pragma once

#include <string>
#include <vector>

#include "hmpc/sim.hpp"
#include "hmpc/terminal.hpp"

namespace hmpc {

struct Config {
  Scenario scenario;
  TerminalDesignSpec design;  // Q and R mirror the tracker weights
  std::string ingredients;    // cached ingredient file, resolved against the config directory
};

// Built-in defaults. configs/default.yaml spells out the same values.
Config default_config();

// A config document overrides the built-in defaults key by key. Unknown keys and
// malformed values raise ConfigError naming the offending key path.
Config parse_config(const std::string& yaml_text, const std::string& origin = "<string>");
Config load_config(const std::string& path);
// Same, applied on top of an existing config.
void apply_config(Config& cfg, const std::string& yaml_text, const std::string& origin = "<string>",
                  const std::string& base_dir = "");

// Complete document for cfg; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const Config& cfg);

// Value lines lacking a "# published" or "# chosen" origin comment, as "line N: key".
std::vector<std::string> lint_origin_comments(const std::string& yaml_text);

std::string shipped_config_dir();

// Loads cfg.ingredients when it matches the design settings, otherwise designs and,
// when a path is set, caches the result there.
TerminalIngredients obtain_ingredients(const Config& cfg, bool* designed = nullptr);

}  // namespace hmpc
