#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

#include "paircorr/pair_sim.hpp"

namespace paircorr {

//! Invalid configuration; names the offending key when there is one.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string key, std::string const& what);
    std::string const& key() const { return key_; }

  private:
    std::string key_;
};

/*!
 * Flat "section.key = value" configuration.
 *
 * One entry per line; '#' starts a comment line; blank lines are ignored.
 * Values are plain numbers or words. Times are nanoseconds and frequencies
 * Hz; unit suffixes are rejected.
 */
struct FlatConfig {
    std::map<std::string, std::string> entries;
};

FlatConfig parse_flat_config(std::istream& is);
FlatConfig load_flat_config(std::string const& path);

// "section.key=value"; the key must be a known one.
void apply_override(FlatConfig& config, std::string_view assignment);

SimConfig build_sim_config(FlatConfig const& config);

// Every key with its built-in default, in canonical order.
FlatConfig default_flat_config();

// Deterministic text of a resolved configuration and its 64-bit FNV-1a hash.
std::string canonical_text(SimConfig const& config);
std::string config_hash(SimConfig const& config);

}  // namespace paircorr
