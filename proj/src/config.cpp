#include "stokesband/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "stokesband/errors.hpp"

namespace stokesband {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section = "run";
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw invalid_data_error("config line " + std::to_string(lineno) +
                                         ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            cfg.sections_[section]; // touch even if empty
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw invalid_data_error("config line " + std::to_string(lineno) + ": expected key = value");
        cfg.sections_[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

std::string Config::serialize() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [section, entries] : sections_) {
        if (!first) out << "\n";
        first = false;
        out << "[" << section << "]\n";
        for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
    }
    return out.str();
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    auto s = sections_.find(section);
    if (s == sections_.end()) return fallback;
    auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& v = get_string(section, key, "");
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw invalid_data_error("config value [" + section + "]." + key + " is not a number: " + v);
    }
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
    if (!has(section, key)) return fallback;
    double d = get_double(section, key, 0.0);
    int i = static_cast<int>(d);
    if (static_cast<double>(i) != d)
        throw invalid_data_error("config value [" + section + "]." + key + " is not an integer");
    return i;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get_string(section, key, "");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw invalid_data_error("config value [" + section + "]." + key + " is not a boolean: " + v);
}

std::vector<double> Config::get_double_list(const std::string& section, const std::string& key,
                                            const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    std::istringstream ss(get_string(section, key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw invalid_data_error("config list [" + section + "]." + key +
                                     " has a non-numeric entry: " + item);
        }
    }
    return out;
}

std::vector<int> Config::get_int_list(const std::string& section, const std::string& key,
                                      const std::vector<int>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<int> out;
    for (double d : get_double_list(section, key, {})) {
        int i = static_cast<int>(d);
        if (static_cast<double>(i) != d)
            throw invalid_data_error("config list [" + section + "]." + key +
                                     " has a non-integer entry");
        out.push_back(i);
    }
    return out;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}

void Config::set_double(const std::string& section, const std::string& key, double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    set(section, key, buf);
}

void Config::set_int(const std::string& section, const std::string& key, int value) {
    set(section, key, std::to_string(value));
}

} // namespace stokesband
