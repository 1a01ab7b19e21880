#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace bcdiff {

// Flat key = value configuration. Lines hold one pair each; '#' starts a
// comment; blank lines are skipped. Environment variables are never read.
class KeyValues {
public:
    KeyValues() = default;

    static KeyValues parse(const std::string& text);
    static KeyValues load(const std::string& path);

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Canonical text form (sorted keys), used for checkpoint echoes.
    std::string serialize() const;

    // Keys that were never read by any getter; lets the CLI reject typos.
    std::set<std::string> unread_keys() const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    mutable std::set<std::string> read_;
};

}  // namespace bcdiff
