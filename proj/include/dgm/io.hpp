#pragma once

// Plain-text I/O. Doubles are written in the shortest form that parses back
// to the same value, so every CSV written here round-trips exactly.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dgm/linalg.hpp"
#include "dgm/model.hpp"

namespace dgm {

std::string format_double(double x);
// Accepts everything format_double emits, including "inf", "-inf" and "nan".
// Throws std::invalid_argument on trailing garbage or an empty field.
double parse_double(std::string_view text);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column; throws std::invalid_argument if absent.
    std::size_t column(std::string_view name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
// First line is the header. No quoting: fields never contain commas.
CsvTable read_csv(const std::filesystem::path& path);

// Observation files come in two layouts:
//   one value per line                 (any model)
//   step,y1,y2 rows of a trajectory    (Lotka-Volterra; flattened in order)
// An optional non-numeric header line and '#' comments are skipped.
Observation read_observation(const std::filesystem::path& path);
void write_observation_values(const std::filesystem::path& path, std::span<const double> values);
void write_trajectory(const std::filesystem::path& path, std::span<const double> flat_y1_y2);

}  // namespace dgm
