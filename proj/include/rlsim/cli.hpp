#pragma once

#include <stdexcept>
#include <string>

#include "rlsim/pipeline.hpp"

namespace rlsim {

// Raised on malformed config files / bad flag values; the CLI maps it to
// exit code 2. The message names the offending line or key.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Parse a flat key=value config (one pair per line, '#' comments, section
// dots as in trainer.clip_epsilon) on top of `base`. Unknown keys are
// rejected with the line number.
experiment_spec parse_config_text(const std::string& text, const experiment_spec& base);

// Apply one key=value override (same key space as the config file).
void apply_config_key(experiment_spec& spec, const std::string& key, const std::string& value,
                      const std::string& where);

// Full CLI: subcommands run | sweep | report.
// Exit codes: 0 success, 1 run failure, 2 config error.
int run_cli(int argc, const char* const* argv);

}  // namespace rlsim
