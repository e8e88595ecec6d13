#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace goexplore {

// Shortest text that parses back to exactly the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

struct MetricRow {
    std::uint64_t game_frames = 0;
    std::uint64_t training_frames = 0;
    std::uint64_t cells = 0;
    std::uint64_t rooms = 0;
    double max_score = 0.0;
    int max_level = 0;
    double wall_seconds = 0.0;

    // Everything but wall time.
    bool same_progress(const MetricRow& o) const
    {
        return game_frames == o.game_frames && training_frames == o.training_frames && cells == o.cells &&
               rooms == o.rooms && max_score == o.max_score && max_level == o.max_level;
    }

    static constexpr const char* csv_header =
        "game_frames,training_frames,cells,rooms,max_score,max_level,wall_seconds";

    std::string csv() const
    {
        std::ostringstream out;
        out << game_frames << ',' << training_frames << ',' << cells << ',' << rooms << ','
            << format_double(max_score) << ',' << max_level << ',' << std::fixed << std::setprecision(3)
            << wall_seconds;
        return out.str();
    }
};

// A parsed CSV file: header names plus numeric rows.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const
    {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name)
                return i;
        throw FormatError("csv: no column '" + name + "'");
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, ','))
        out.push_back(cur);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

// Numeric CSV with a header line. Malformed input throws FormatError naming
// the file and line.
inline CsvTable parse_csv(std::istream& in, const std::string& origin = "csv")
{
    CsvTable t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto fields = split_csv_line(line);
        if (t.columns.empty()) {
            t.columns = fields;
            continue;
        }
        if (fields.size() != t.columns.size())
            throw FormatError(origin + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.columns.size()) + " fields, got " + std::to_string(fields.size()));
        std::vector<double> row;
        for (const auto& f : fields) {
            double v = 0;
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || p != f.data() + f.size())
                throw FormatError(origin + ":" + std::to_string(lineno) + ": not a number: '" + f + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (t.columns.empty())
        throw FormatError(origin + ":1: missing header");
    return t;
}

inline CsvTable load_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw FormatError(path + ": cannot open");
    return parse_csv(in, path);
}

} // namespace goexplore
