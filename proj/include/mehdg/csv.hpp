#pragma once

#include <string>
#include <vector>

namespace mehdg
{

/// Shortest decimal form with 17 significant digits (round-trips a double).
std::string fmt17(double x);

/// Simple comma-separated table; cells are kept as text.
struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;
    double number(std::size_t row, const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

} // namespace mehdg
