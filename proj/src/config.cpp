#include "dispatchd/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dispatchd {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::string env_name(const std::string& key) {
    std::string out = "DISPATCHD_";
    for (char c : key) {
        if (c == '.' || c == '-') {
            out.push_back('_');
        } else {
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

} // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[' && s.back() == ']') {
            // "[bs 3]" -> key prefix "bs3."
            std::string name = trim(s.substr(1, s.size() - 2));
            std::string collapsed;
            for (char c : name) {
                if (!std::isspace(static_cast<unsigned char>(c))) collapsed.push_back(c);
            }
            section = collapsed.empty() ? "" : collapsed + ".";
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected key=value, got '" + s + "'");
        }
        cfg.values_[section + trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

void Config::set(const std::string& key, const std::string& value) {
    overrides_[key] = value;
}

std::optional<std::string> Config::lookup(const std::string& key) const {
    if (auto it = overrides_.find(key); it != overrides_.end()) return it->second;
    if (const char* env = std::getenv(env_name(key).c_str())) return std::string(env);
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    return std::nullopt;
}

bool Config::has(const std::string& key) const {
    return lookup(key).has_value();
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    auto v = lookup(key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto v = lookup(key);
    if (!v) return fallback;
    try {
        return std::stod(*v);
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "' is not a number: " + *v);
    }
}

long long Config::get_int(const std::string& key, long long fallback) const {
    auto v = lookup(key);
    if (!v) return fallback;
    try {
        return std::stoll(*v);
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "' is not an integer: " + *v);
    }
}

double Config::get_bs_double(int bs_id, const std::string& key, double fallback) const {
    std::string scoped = "bs" + std::to_string(bs_id) + "." + key;
    if (has(scoped)) return get_double(scoped, fallback);
    return get_double(key, fallback);
}

void Config::merge_from(const Config& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
    for (const auto& [k, v] : other.overrides_) overrides_[k] = v;
}

std::string Config::dump() const {
    std::map<std::string, std::string> merged = values_;
    for (const auto& [k, v] : overrides_) merged[k] = v;
    std::ostringstream out;
    for (const auto& [k, v] : merged) out << k << " = " << v << "\n";
    return out.str();
}

} // namespace dispatchd
