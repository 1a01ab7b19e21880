#include "bcdiff/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bcdiff {

namespace {

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string s = strip(line);
        if (s.empty()) continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        " is not key = value");
        std::string key = strip(s.substr(0, eq));
        std::string value = strip(s.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) +
                                                     " has an empty key");
        kv.entries_[key] = value;
    }
    return kv;
}

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool KeyValues::has(const std::string& key) const { return entries_.count(key) > 0; }

void KeyValues::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
    read_.insert(key);
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
    read_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + " is not a number: " + it->second);
    }
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
    read_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + " is not an integer: " + it->second);
    }
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
    read_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        std::uint64_t v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + " is not an integer: " + it->second);
    }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
    read_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config key " + key + " is not a boolean: " + v);
}

std::string KeyValues::serialize() const {
    std::ostringstream out;
    for (const auto& [key, value] : entries_) out << key << " = " << value << "\n";
    return out.str();
}

std::set<std::string> KeyValues::unread_keys() const {
    std::set<std::string> unread;
    for (const auto& [key, _] : entries_)
        if (!read_.count(key)) unread.insert(key);
    return unread;
}

}  // namespace bcdiff
