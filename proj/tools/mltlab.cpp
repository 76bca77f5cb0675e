#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "commands.hpp"
#include "mlt/errors.hpp"
#include "mlt/version.hpp"

using mltlab::json;

namespace {

std::string flag_name(const std::string& key) {
    std::string f = key;
    for (char& c : f)
        if (c == '_') c = '-';
    return "--" + f;
}

std::string show_default(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i].dump();
        return s;
    }
    return v.dump();
}

json parse_scalar(const std::string& text, const json& like, const std::string& key) {
    try {
        if (like.is_boolean()) {
            if (text.empty() || text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
        } else if (like.is_number_unsigned() || like.is_number_integer()) {
            std::size_t pos = 0;
            const long long v = std::stoll(text, &pos);
            if (pos == text.size()) return like.is_number_unsigned() && v >= 0 ? json(static_cast<unsigned long long>(v)) : json(v);
        } else if (like.is_number_float()) {
            std::size_t pos = 0;
            const double v = std::stod(text, &pos);
            if (pos == text.size()) return v;
        } else if (like.is_string()) {
            return text;
        }
    } catch (const std::exception&) {
    }
    throw mlt::InvalidParameter("bad value '" + text + "' for " + key);
}

json parse_flag(const std::string& text, const json& def, const std::string& key) {
    if (!def.is_array()) return parse_scalar(text, def, key);
    json like = def.empty() ? json(0.0) : def[0];
    json out = json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_scalar(item, like, key));
    return out;
}

bool same_kind(const json& v, const json& def) {
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_number_integer() || def.is_number_unsigned()) return v.is_number_integer() || v.is_number_unsigned();
    if (def.is_number_float()) return v.is_number();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) {
        if (!v.is_array()) return false;
        const json like = def.empty() ? json(0.0) : def[0];
        for (const auto& e : v)
            if (!same_kind(e, like)) return false;
        return true;
    }
    return false;
}

struct Bound {
    const mltlab::CommandSpec* spec = nullptr;
    CLI::App* app = nullptr;
    std::map<std::string, std::string> raw;
    std::string config_path;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mltlab: multi-level translation simulation laboratory"};
    app.set_version_flag("--version", std::string(mlt::kVersion));
    app.require_subcommand(1);
    int jobs = 0;
    app.add_option("--jobs,-j", jobs, "worker threads for independent trials (0: all cores)")->capture_default_str();

    const char* env_out = std::getenv("MLTLAB_OUT");
    const std::string default_out = env_out && *env_out ? env_out : "out";

    const auto& table = mltlab::command_table();
    std::vector<Bound> bound(table.size());
    std::map<std::string, CLI::App*> groups;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto& spec = table[i];
        Bound& b = bound[i];
        b.spec = &spec;
        const auto space = spec.name.find(' ');
        if (space == std::string::npos) {
            b.app = app.add_subcommand(spec.name, spec.help);
        } else {
            const std::string group = spec.name.substr(0, space);
            if (!groups.count(group)) {
                groups[group] = app.add_subcommand(group, group + " experiments");
                groups[group]->require_subcommand(1);
            }
            b.app = groups[group]->add_subcommand(spec.name.substr(space + 1), spec.help);
        }
        b.app->add_option("--config", b.config_path, "JSON config file; flags override it");
        for (const auto& p : spec.params) {
            std::string def = p.name == "out" ? default_out : show_default(p.def);
            auto* opt = b.app->add_option(flag_name(p.name), b.raw[p.name], p.help + " [default: " + def + "]");
            if (p.def.is_boolean()) opt->expected(0, 1);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (jobs > 0) omp_set_num_threads(jobs);

    for (auto& b : bound) {
        if (!b.app->parsed()) continue;
        mltlab::Invocation inv;
        inv.command = b.spec->name;
        try {
            json cfg = json::object();
            for (const auto& p : b.spec->params) cfg[p.name] = p.name == "out" ? json(default_out) : p.def;
            if (!b.config_path.empty()) {
                std::ifstream f(b.config_path);
                if (!f) throw mlt::InvalidParameter("cannot read config file " + b.config_path);
                json file;
                try {
                    file = json::parse(f);
                } catch (const json::parse_error& e) {
                    throw mlt::ParseError(std::string("config file is not valid JSON: ") + e.what());
                }
                if (!file.is_object()) throw mlt::InvalidParameter("config file must hold a JSON object");
                for (auto it = file.begin(); it != file.end(); ++it) {
                    if (!cfg.contains(it.key()))
                        throw mlt::InvalidParameter("unknown config field '" + it.key() + "' for " + inv.command);
                    if (!same_kind(it.value(), cfg[it.key()]))
                        throw mlt::InvalidParameter("config field '" + it.key() + "' has the wrong type");
                    cfg[it.key()] = it.value();
                }
            }
            for (const auto& p : b.spec->params) {
                if (b.app->count(flag_name(p.name)) == 0) continue;
                cfg[p.name] = parse_flag(b.raw[p.name], p.def, p.name);
            }
            inv.cfg = cfg;
            return b.spec->run(inv);
        } catch (const mlt::SamplingFailure& e) {
            std::cerr << "mltlab " << inv.command << ": " << e.what() << "\n";
            return mltlab::kSampling;
        } catch (const mlt::Error& e) {
            std::cerr << "mltlab " << inv.command << ": " << e.what() << "\n";
            return mltlab::kBadInput;
        } catch (const json::exception& e) {
            std::cerr << "mltlab " << inv.command << ": bad config value: " << e.what() << "\n";
            return mltlab::kBadInput;
        }
    }
    return mltlab::kBadInput;
}
