#pragma once

#include <map>
#include <optional>
#include <string>

namespace dispatchd {

// Flat key-value configuration with optional `[bs N]` sections for per-BS
// overrides. File syntax: `key = value`, `#` comments, blank lines ignored.
// Every key can also be overridden through the environment with the
// DISPATCHD_ prefix (key uppercased, '.' and '-' mapped to '_'), which wins
// over file values; explicit set() calls (CLI flags) win over both.
class Config {
public:
    Config() = default;

    static Config load(const std::string& path);

    // Parses `text` as if it were file contents (used by tests and defaults).
    static Config parse(const std::string& text, const std::string& origin = "<inline>");

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;

    // Per-BS lookup: tries "bs<id>.<key>" first, then the global key.
    double get_bs_double(int bs_id, const std::string& key, double fallback) const;

    // Merges `other` on top of this config (other wins).
    void merge_from(const Config& other);

    const std::map<std::string, std::string>& entries() const { return values_; }

    // Serializes back to key=value lines (sorted), used to echo the
    // effective configuration into run directories.
    std::string dump() const;

private:
    std::optional<std::string> lookup(const std::string& key) const;

    std::map<std::string, std::string> values_;      // from file / set()
    std::map<std::string, std::string> overrides_;   // from set() after load
};

} // namespace dispatchd
