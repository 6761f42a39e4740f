#include "farmstate/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "farmstate/errors.hpp"

namespace farmstate::csv {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

bool try_parse_double(std::string_view field, double& out) {
    if (field.empty()) return false;
    std::string tmp(field);
    const char* begin = tmp.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + tmp.size();
}

bool try_parse_index(std::string_view field, long long& out) {
    if (field.empty()) return false;
    std::string tmp(field);
    const char* begin = tmp.c_str();
    char* end = nullptr;
    out = std::strtoll(begin, &end, 10);
    return end == begin + tmp.size() && out >= 0;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure: " + path);
    return ss.str();
}

}  // namespace farmstate::csv
