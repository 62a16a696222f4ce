#ifndef CELF_MODEL_IO_HPP
#define CELF_MODEL_IO_HPP

#include <istream>
#include <ostream>
#include <string>

#include "celf/estimator.hpp"
#include "celf/text.hpp"

namespace celf {

/// Model file layout (version 1), one item per line:
///
///   # CELF loss-field model
///   format=celf-model
///   version=1
///   <key>=<value>            header block, keys listed in write_model()
///   field.size=<M>
///   pixel,loss_db            CSV payload, M rows in pixel order
///   0,<value>
///   ...
///
/// Numbers use the shortest decimal form that parses back to the same double,
/// so write/read round-trips bit-exactly.
inline constexpr int kModelFormatVersion = 1;

inline void write_model(std::ostream& out, const CelfModel& m)
{
    using text::format_double;
    const auto kv = [&out](const char* key, const std::string& value) { out << key << '=' << value << '\n'; };
    out << "# CELF loss-field model\n";
    kv("format", "celf-model");
    kv("version", std::to_string(kModelFormatVersion));
    kv("pathloss.intercept", format_double(m.pathloss.intercept));
    kv("pathloss.exponent", format_double(m.pathloss.exponent));
    kv("pathloss.ref_distance", format_double(m.pathloss.ref_distance));
    kv("hyper.pixel_width", format_double(m.hyper.pixel_width));
    kv("hyper.shadow_ratio", format_double(m.hyper.shadow_ratio));
    kv("hyper.space_constant", format_double(m.hyper.space_constant));
    kv("hyper.excess_length", format_double(m.hyper.excess_length));
    kv("hyper.alpha", format_double(m.hyper.alpha));
    kv("grid.origin_x", format_double(m.grid.origin().x));
    kv("grid.origin_y", format_double(m.grid.origin().y));
    kv("grid.pixel_width", format_double(m.grid.pixel_width()));
    kv("grid.n_cols", std::to_string(m.grid.n_cols()));
    kv("grid.n_rows", std::to_string(m.grid.n_rows()));
    kv("prior.sigma_x_sq", format_double(m.prior.sigma_x_sq));
    kv("prior.delta", format_double(m.prior.delta));
    kv("solver_path", std::string(to_string(m.solver_path)));
    const TrainingDiagnostics& d = m.diagnostics;
    kv("train.n_links", std::to_string(d.n_links));
    kv("train.n_pixels", std::to_string(d.n_pixels));
    kv("train.fading_variance", format_double(d.fading_variance));
    kv("train.residual_variance", format_double(d.residual_variance));
    kv("train.noise_variance", format_double(d.noise_variance));
    kv("train.empty_rows", std::to_string(d.empty_rows));
    kv("train.degenerate", d.degenerate ? "1" : "0");
    kv("field.size", std::to_string(m.field.size()));
    out << "pixel,loss_db\n";
    for (Eigen::Index i = 0; i < m.field.size(); ++i)
        out << i << ',' << format_double(m.field[i]) << '\n';
}

inline CelfModel read_model(std::istream& in, const std::string& source = "model")
{
    const auto fail = [&source](const std::string& msg) { return Error("model", source + ": " + msg); };

    text::KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    bool payload = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#')
            continue;
        if (t == "pixel,loss_db") {
            payload = true;
            break;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw fail("line " + std::to_string(lineno) + ": expected key=value");
        kv[std::string(t.substr(0, eq))] = std::string(t.substr(eq + 1));
    }
    if (kv["format"] != "celf-model")
        throw fail("not a celf-model file");
    if (kv["version"] != std::to_string(kModelFormatVersion))
        throw fail("unsupported model version '" + kv["version"] + "'");
    if (!payload)
        throw fail("missing field payload");

    const auto num = [&](const char* key) {
        const auto it = kv.find(key);
        if (it == kv.end())
            throw fail(std::string("missing key '") + key + "'");
        const auto v = text::parse_double(it->second);
        if (!v)
            throw fail(std::string("bad number for '") + key + "'");
        return *v;
    };
    const auto count = [&](const char* key) {
        const auto it = kv.find(key);
        const auto v = it == kv.end() ? std::nullopt : text::parse_integer<std::size_t>(it->second);
        if (!v)
            throw fail(std::string("missing or bad count '") + key + "'");
        return *v;
    };

    CelfModel m;
    m.pathloss = {num("pathloss.intercept"), num("pathloss.exponent"), num("pathloss.ref_distance")};
    m.hyper = {num("hyper.pixel_width"), num("hyper.shadow_ratio"), num("hyper.space_constant"),
               num("hyper.excess_length"), num("hyper.alpha")};
    validate(m.hyper);
    m.grid = PixelGrid({num("grid.origin_x"), num("grid.origin_y")}, num("grid.pixel_width"), count("grid.n_cols"),
                       count("grid.n_rows"));
    m.prior = FieldPrior{num("prior.sigma_x_sq"), num("prior.delta"), m.grid};
    const auto path = parse_solver_path(kv["solver_path"]);
    if (!path)
        throw fail("unknown solver_path '" + kv["solver_path"] + "'");
    m.solver_path = *path;
    m.diagnostics.n_links = count("train.n_links");
    m.diagnostics.n_pixels = count("train.n_pixels");
    m.diagnostics.fading_variance = num("train.fading_variance");
    m.diagnostics.residual_variance = num("train.residual_variance");
    m.diagnostics.noise_variance = num("train.noise_variance");
    m.diagnostics.empty_rows = count("train.empty_rows");
    m.diagnostics.degenerate = kv["train.degenerate"] == "1";

    const std::size_t size = count("field.size");
    if (size != m.grid.size())
        throw fail("field.size does not match the grid dimensions");
    m.field.resize(static_cast<Eigen::Index>(size));
    for (std::size_t i = 0; i < size; ++i) {
        if (!std::getline(in, line))
            throw fail("field payload truncated at pixel " + std::to_string(i));
        const auto cells = text::split(text::trim(line), ',');
        const auto idx = cells.size() == 2 ? text::parse_integer<std::size_t>(cells[0]) : std::nullopt;
        const auto val = cells.size() == 2 ? text::parse_double(cells[1]) : std::nullopt;
        if (!idx || *idx != i || !val)
            throw fail("malformed field row for pixel " + std::to_string(i));
        m.field[static_cast<Eigen::Index>(i)] = *val;
    }
    return m;
}

inline void save_model(const std::string& path, const CelfModel& m)
{
    auto out = text::open_output(path, "model");
    write_model(out, m);
    if (!out)
        throw Error("model", "failed writing '" + path + "'");
}

inline CelfModel load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("model", "cannot open model file '" + path + "'");
    return read_model(in, path);
}

} // namespace celf

#endif // CELF_MODEL_IO_HPP
