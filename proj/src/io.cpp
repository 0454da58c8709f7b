#include "dgm/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dgm {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool is_number(std::string_view s) {
    try {
        parse_double(s);
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

}  // namespace

std::string format_double(double x) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

double parse_double(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw std::invalid_argument("empty number");
    if (text.front() == '+') text.remove_prefix(1);
    double x = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    return x;
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::invalid_argument("csv: no column '" + std::string(name) + "'");
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out = open_out(path);
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << fields[i];
        }
        out << '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (first) {
            t.header = split_fields(line);
            first = false;
        } else {
            t.rows.push_back(split_fields(line));
        }
    }
    return t;
}

Observation read_observation(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open observation file " + path.string());
    Observation obs;
    obs.label = path.string();
    std::string line;
    std::size_t width = 0;
    int line_no = 0;
    bool seen_data = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = split_fields(t);
        if (!seen_data && !is_number(fields.front())) continue;
        seen_data = true;
        if (width == 0) width = fields.size();
        if (fields.size() != width || (width != 1 && width != 3))
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 1 value or step,y1,y2 per line");
        try {
            if (width == 1) {
                obs.values.push_back(parse_double(fields[0]));
            } else {
                obs.values.push_back(parse_double(fields[1]));
                obs.values.push_back(parse_double(fields[2]));
            }
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (obs.values.empty()) throw std::runtime_error(path.string() + ": no observed values");
    return obs;
}

void write_observation_values(const std::filesystem::path& path, std::span<const double> values) {
    CsvTable t;
    t.header = {"value"};
    for (double v : values) t.rows.push_back({format_double(v)});
    write_csv(path, t);
}

void write_trajectory(const std::filesystem::path& path, std::span<const double> flat_y1_y2) {
    if (flat_y1_y2.size() % 2) throw std::invalid_argument("write_trajectory: odd number of values");
    CsvTable t;
    t.header = {"step", "y1", "y2"};
    for (std::size_t s = 0; s < flat_y1_y2.size() / 2; ++s)
        t.rows.push_back({std::to_string(s + 1), format_double(flat_y1_y2[2 * s]), format_double(flat_y1_y2[2 * s + 1])});
    write_csv(path, t);
}

}  // namespace dgm
