#pragma once

#include <string>
#include <vector>

#include "fedsv/orchestrator.hpp"

namespace fedsv {

// A parsed experiment file: the run itself plus sweep-only extras.
struct ParsedConfig {
    RunConfig run;
    std::vector<DefenseKind> sweep_defenses;  // empty means just run.defense
};

// Flat `key = value` schema with dotted section names; '#' starts a
// comment. Unknown keys and bad values are ConfigErrors that carry the
// line number. Keys not present keep their defaults.
ParsedConfig parse_config_text(const std::string& text, const std::string& origin);
ParsedConfig parse_config_file(const std::string& path);

// Canonical form: every key, one per line, in fixed order. Dump/parse is
// a fixed point: parse(dump(c)) dumps back to the same text.
std::string dump_config(const ParsedConfig& config);

}  // namespace fedsv
