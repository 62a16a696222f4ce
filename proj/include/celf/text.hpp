#ifndef CELF_TEXT_HPP
#define CELF_TEXT_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "celf/error.hpp"

namespace celf::text {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v)
{
    if (v == 0.0)
        v = 0.0; // fold -0 so outputs do not depend on the sign of zero
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) noexcept
{
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

/// Parses a complete decimal number; accepts "nan"/"inf" spellings so that
/// callers can reject them as invariant violations rather than syntax errors.
inline std::optional<double> parse_double(std::string_view s) noexcept
{
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    if (s.empty())
        return std::nullopt;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

template <class Int>
std::optional<Int> parse_integer(std::string_view s) noexcept
{
    s = trim(s);
    Int v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

/// Ordered `key=value` pairs; `#` starts a comment line.
using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::istream& in, const std::string& stage, const std::string& source)
{
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw Error(stage, source + ":" + std::to_string(lineno) + ": expected key=value, got '" + std::string(t) + "'");
        const std::string key(trim(t.substr(0, eq)));
        if (key.empty())
            throw Error(stage, source + ":" + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw Error(stage, source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = std::string(trim(t.substr(eq + 1)));
    }
    return kv;
}

inline KeyValues read_key_values(const std::string& path, const std::string& stage)
{
    std::ifstream in(path);
    if (!in)
        throw Error(stage, "cannot open '" + path + "'");
    return parse_key_values(in, stage, path);
}

inline double require_double(const KeyValues& kv, const std::string& key, const std::string& stage)
{
    const auto it = kv.find(key);
    if (it == kv.end())
        throw Error(stage, "missing key '" + key + "'");
    const auto v = parse_double(it->second);
    if (!v)
        throw Error(stage, "key '" + key + "' is not a number: '" + it->second + "'");
    return *v;
}

inline std::ofstream open_output(const std::string& path, const std::string& stage)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(stage, "cannot write '" + path + "'");
    return out;
}

} // namespace celf::text

#endif // CELF_TEXT_HPP
