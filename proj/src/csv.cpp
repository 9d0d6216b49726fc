#include "mehdg/csv.hpp"
#include "mehdg/types.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace mehdg
{

std::string fmt17(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

int CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    throw InvalidArgument("no column '" + name + "'");
}

double CsvTable::number(std::size_t row, const std::string& name) const
{
    const std::string& cell = rows.at(row).at(column(name));
    if (cell.empty())
        return std::nan("");
    return std::stod(cell);
}

CsvTable parse_csv(const std::string& text)
{
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (line.back() == ',')
            cells.emplace_back();
        if (first)
            t.header = std::move(cells);
        else
            t.rows.push_back(std::move(cells));
        first = false;
    }
    return t;
}

} // namespace mehdg
