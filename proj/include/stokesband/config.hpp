#pragma once

#include <map>
#include <string>
#include <vector>

namespace stokesband {

/// Flat sectioned key-value configuration:
///
///   [section]
///   key = value
///   list = 1, 2, 3
///
/// Unknown sections/keys are preserved. Serialization is canonical (sorted
/// sections and keys), so parse-then-serialize round-trips identically.
class Config {
  public:
    Config() = default;
    static Config parse(const std::string& text);
    static Config load(const std::string& path);
    std::string serialize() const;

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const;
    std::vector<int> get_int_list(const std::string& section, const std::string& key,
                                  const std::vector<int>& fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    void set_double(const std::string& section, const std::string& key, double value);
    void set_int(const std::string& section, const std::string& key, int value);

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

} // namespace stokesband
