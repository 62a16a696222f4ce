#ifndef CELF_FIELD_EXPORT_HPP
#define CELF_FIELD_EXPORT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "celf/error.hpp"
#include "celf/geometry.hpp"
#include "celf/text.hpp"

namespace celf {

/// Field as CSV, one pixel per row in pixel-index order:
///   x_center,y_center,loss_db
inline void write_field_csv(std::ostream& out, const PixelGrid& grid, const Eigen::VectorXd& field)
{
    if (field.size() != static_cast<Eigen::Index>(grid.size()))
        throw Error("export", "field length does not match the grid");
    using text::format_double;
    out << "x_center,y_center,loss_db\n";
    for (std::size_t m = 0; m < grid.size(); ++m) {
        const Point2D c = grid.center(m);
        out << format_double(c.x) << ',' << format_double(c.y) << ',' << format_double(field[static_cast<Eigen::Index>(m)])
            << '\n';
    }
}

/// Reads the loss_db column back, in pixel order.
inline Eigen::VectorXd read_field_csv(std::istream& in, const std::string& source = "field")
{
    std::string line;
    if (!std::getline(in, line) || text::trim(line) != "x_center,y_center,loss_db")
        throw Error("export", source + ": expected header x_center,y_center,loss_db");
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty())
            continue;
        const auto cells = text::split(text::trim(line), ',');
        const auto v = cells.size() == 3 ? text::parse_double(cells[2]) : std::nullopt;
        if (!v)
            throw Error("export", source + ":" + std::to_string(lineno) + ": malformed field row");
        values.push_back(*v);
    }
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Linear map from [min, max] of the field onto gray levels 0..255. A constant
/// field maps to mid-gray.
struct GrayMapping
{
    double min = 0.0;
    double max = 0.0;

    std::uint8_t level(double v) const
    {
        if (!(max > min))
            return 128;
        const double t = std::clamp((v - min) / (max - min), 0.0, 1.0);
        return static_cast<std::uint8_t>(std::lround(t * 255.0));
    }

    double value(std::uint8_t level) const
    {
        if (!(max > min))
            return min;
        return min + (max - min) * static_cast<double>(level) / 255.0;
    }
};

inline GrayMapping gray_mapping(const Eigen::VectorXd& field)
{
    if (field.size() == 0)
        return {};
    return {field.minCoeff(), field.maxCoeff()};
}

/// Binary (P5) portable graymap, north up: the first image row is the grid's
/// top row.
inline void write_pgm(std::ostream& out, const PixelGrid& grid, const Eigen::VectorXd& field, const GrayMapping& map)
{
    if (field.size() != static_cast<Eigen::Index>(grid.size()))
        throw Error("export", "field length does not match the grid");
    out << "P5\n" << grid.n_cols() << ' ' << grid.n_rows() << "\n255\n";
    std::vector<char> row(grid.n_cols());
    for (std::size_t r = grid.n_rows(); r-- > 0;) {
        for (std::size_t c = 0; c < grid.n_cols(); ++c)
            row[c] = static_cast<char>(map.level(field[static_cast<Eigen::Index>(grid.index(c, r))]));
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

inline void write_pgm_sidecar(std::ostream& out, const PixelGrid& grid, const GrayMapping& map)
{
    using text::format_double;
    out << "# gray level g in 0..255 encodes loss_db = min_db + (max_db - min_db) * g / 255\n";
    out << "min_db=" << format_double(map.min) << '\n';
    out << "max_db=" << format_double(map.max) << '\n';
    out << "constant_field=" << (map.max > map.min ? 0 : 1) << '\n';
    out << "width_px=" << grid.n_cols() << '\n';
    out << "height_px=" << grid.n_rows() << '\n';
    out << "pixel_width_m=" << format_double(grid.pixel_width()) << '\n';
    out << "origin_x_m=" << format_double(grid.origin().x) << '\n';
    out << "origin_y_m=" << format_double(grid.origin().y) << '\n';
    out << "orientation=first image row is the northmost grid row\n";
}

} // namespace celf

#endif // CELF_FIELD_EXPORT_HPP
