#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace mltlab {

using json = nlohmann::json;

// A parameter's type is the type of its default; lists are comma-separated on
// the command line and JSON arrays in a config file.
struct ParamSpec {
    std::string name;
    json def;
    std::string help;
};

struct Invocation {
    std::string command;  // e.g. "sq decay"
    json cfg;             // fully resolved: defaults < config file < flags
};

struct CommandSpec {
    std::string name;
    std::string help;
    std::vector<ParamSpec> params;
    int (*run)(const Invocation&);
};

const std::vector<CommandSpec>& command_table();

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;       // recovery / equivalence failed
inline constexpr int kBadInput = 2;     // invalid parameters or malformed files
inline constexpr int kSampling = 3;     // no coverable input within the retry cap

}  // namespace mltlab
