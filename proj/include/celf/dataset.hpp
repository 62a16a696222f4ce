#ifndef CELF_DATASET_HPP
#define CELF_DATASET_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "celf/error.hpp"
#include "celf/estimator.hpp"
#include "celf/geometry.hpp"
#include "celf/pathloss.hpp"
#include "celf/prior.hpp"
#include "celf/text.hpp"

namespace celf {

// ---------------------------------------------------------------------------
// Measurement records and the CSV schema
//
//   tx_x,tx_y,rx_x,rx_y,rss_dbm[,link_id][,group_tag]
//
// Coordinates are planar meters. Latitude/longitude must be projected first.

enum class GroupTag
{
    stationary,
    sub_wavelength,
    other,
};

inline std::string_view to_string(GroupTag g) noexcept
{
    switch (g) {
    case GroupTag::stationary: return "stationary";
    case GroupTag::sub_wavelength: return "sub_wavelength";
    default: return "other";
    }
}

inline std::optional<GroupTag> parse_group_tag(std::string_view s) noexcept
{
    for (auto g : {GroupTag::stationary, GroupTag::sub_wavelength, GroupTag::other})
        if (s == to_string(g))
            return g;
    return std::nullopt;
}

struct MeasurementRecord
{
    Link link;
    std::optional<GroupTag> group;
};

inline std::vector<Link> links_of(std::span<const MeasurementRecord> records)
{
    std::vector<Link> links;
    links.reserve(records.size());
    for (const auto& r : records)
        links.push_back(r.link);
    return links;
}

struct RejectedRow
{
    std::size_t line = 0;
    std::string reason;
};

struct LoadResult
{
    std::vector<MeasurementRecord> records;
    std::vector<RejectedRow> rejected;
    bool has_rss = true;
    bool has_link_ids = false;
    bool has_group_tags = false;
};

struct LoadOptions
{
    /// When false, the rss_dbm column may be omitted (prediction inputs); the
    /// received power of every loaded link is then 0.
    bool require_rss = true;
};

inline LoadResult read_csv(std::istream& in, const std::string& source, const LoadOptions& options = {})
{
    const auto where = [&source](std::size_t line) { return source + ":" + std::to_string(line) + ": "; };

    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (!have_header && std::getline(in, line)) {
        ++lineno;
        if (!text::trim(line).empty())
            have_header = true;
    }
    if (!have_header)
        throw Error("load", source + ": empty file");

    LoadResult result;
    const auto header = text::split(text::trim(line), ',');
    const std::vector<std::string_view> base = {"tx_x", "tx_y", "rx_x", "rx_y", "rss_dbm"};
    std::size_t col = 0;
    for (; col < base.size() && col < header.size(); ++col)
        if (text::trim(header[col]) != base[col])
            break;
    if (col == 4 && !options.require_rss)
        result.has_rss = false;
    else if (col < base.size()) {
        throw Error("load", where(lineno) + "missing column '" + std::string(base[col]) +
                                "'; expected header tx_x,tx_y,rx_x,rx_y,rss_dbm[,link_id][,group_tag]");
    }
    int id_col = -1, tag_col = -1;
    for (; col < header.size(); ++col) {
        const auto name = text::trim(header[col]);
        if (name == "link_id" && id_col < 0 && tag_col < 0)
            id_col = static_cast<int>(col);
        else if (name == "group_tag" && tag_col < 0)
            tag_col = static_cast<int>(col);
        else
            throw Error("load", where(lineno) + "unexpected column '" + std::string(name) + "'");
    }
    result.has_link_ids = id_col >= 0;
    result.has_group_tags = tag_col >= 0;
    const std::size_t n_cols = header.size();
    const std::size_t n_numeric = result.has_rss ? 5 : 4;

    while (std::getline(in, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty())
            continue;
        const auto cells = text::split(t, ',');
        if (cells.size() != n_cols)
            throw Error("load", where(lineno) + "expected " + std::to_string(n_cols) + " cells, found " +
                                    std::to_string(cells.size()));
        double v[5] = {0, 0, 0, 0, 0};
        for (std::size_t c = 0; c < n_numeric; ++c) {
            const auto parsed = text::parse_double(cells[c]);
            if (!parsed)
                throw Error("load", where(lineno) + "non-numeric value '" + std::string(text::trim(cells[c])) +
                                        "' in column " + std::string(base[c]));
            v[c] = *parsed;
        }
        std::string id = id_col >= 0 ? std::string(text::trim(cells[static_cast<std::size_t>(id_col)])) : std::string{};
        std::optional<GroupTag> tag;
        if (tag_col >= 0) {
            const auto cell = text::trim(cells[static_cast<std::size_t>(tag_col)]);
            if (!cell.empty()) {
                tag = parse_group_tag(cell);
                if (!tag) {
                    result.rejected.push_back({lineno, "unknown group_tag '" + std::string(cell) + "'"});
                    continue;
                }
            }
        }
        try {
            result.records.push_back({Link({v[0], v[1]}, {v[2], v[3]}, v[4], std::move(id)), tag});
        } catch (const Error& e) {
            result.rejected.push_back({lineno, e.what()});
        }
    }
    return result;
}

inline LoadResult load_csv(const std::string& path, const LoadOptions& options = {})
{
    std::ifstream in(path);
    if (!in)
        throw Error("load", "cannot open '" + path + "'");
    return read_csv(in, path, options);
}

inline void write_csv(std::ostream& out, std::span<const MeasurementRecord> records)
{
    bool ids = false, tags = false;
    for (const auto& r : records) {
        ids = ids || !r.link.id().empty();
        tags = tags || r.group.has_value();
    }
    out << "tx_x,tx_y,rx_x,rx_y,rss_dbm";
    if (ids)
        out << ",link_id";
    if (tags)
        out << ",group_tag";
    out << '\n';
    using text::format_double;
    for (const auto& r : records) {
        const Link& l = r.link;
        out << format_double(l.tx().x) << ',' << format_double(l.tx().y) << ',' << format_double(l.rx().x) << ','
            << format_double(l.rx().y) << ',' << format_double(l.rss());
        if (ids)
            out << ',' << l.id();
        if (tags)
            out << ',' << (r.group ? to_string(*r.group) : std::string_view{});
        out << '\n';
    }
}

inline void save_csv(const std::string& path, std::span<const MeasurementRecord> records)
{
    auto out = text::open_output(path, "dataset");
    write_csv(out, records);
}

// ---------------------------------------------------------------------------
// Synthetic scenarios

enum class NodePlacement
{
    uniform,
    lattice,
};

enum class LinkPolicy
{
    all_pairs,    ///< every unordered node pair
    bipartite,    ///< the first n_receivers nodes receive from all others
    random_pairs, ///< `link_count` distinct pairs drawn without replacement
};

/// Ground truth and sampling policy for a synthetic measurement campaign.
///
/// Nodes live in [0, width] x [0, height]; the true loss field is drawn from
/// the exponential-covariance prior on the pixel grid covering that box. When
/// `fading_variance` is positive the field is rescaled so the link shadowing
/// has variance shadow_ratio * fading_variance and the i.i.d. noise takes the
/// remainder; otherwise `sigma_x_sq` and `noise_var` are used as given.
struct SyntheticScenario
{
    std::string name = "custom";
    double width = 10.0;
    double height = 10.0;
    double pixel_width = 0.5;

    double sigma_x_sq = 1.0;
    double space_constant = 1.0;
    double excess_length = 0.5; ///< ellipse excess length of the forward model

    double exponent = 2.0;
    double intercept = -30.0;
    double ref_distance = 1.0;

    double noise_var = 0.0;
    double fading_variance = 0.0;
    double shadow_ratio = 0.5;

    std::size_t node_count = 30;
    NodePlacement placement = NodePlacement::uniform;
    LinkPolicy link_policy = LinkPolicy::all_pairs;
    std::size_t n_receivers = 5;
    std::size_t link_count = 0;

    /// Repeated measurements for noise-floor analysis. Stationary samples
    /// repeat one link with measurement noise only; sub-wavelength samples
    /// jitter the transmitter within `wavelength` and carry the remaining
    /// noise variance (noise_var - measurement_noise_var).
    std::size_t stationary_samples = 0;
    std::size_t sub_wavelength_samples = 0;
    double measurement_noise_var = 0.0;
    double wavelength = 0.65;

    Hyperparameters hyper; ///< suggested model hyperparameters for this site

    std::uint64_t seed = 1;

    PixelGrid grid() const
    {
        return PixelGrid({0.0, 0.0}, pixel_width, detail::covering_count(width, pixel_width),
                         detail::covering_count(height, pixel_width));
    }

    LogDistanceModel pathloss() const { return {intercept, exponent, ref_distance}; }
};

inline void validate(const SyntheticScenario& s)
{
    const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(s.width) || !positive(s.height) || !positive(s.pixel_width))
        throw Error("synth", "scenario box and pixel width must be positive");
    if (!positive(s.sigma_x_sq) || !positive(s.space_constant) || !positive(s.excess_length))
        throw Error("synth", "scenario prior parameters must be positive");
    if (!positive(s.ref_distance) || !std::isfinite(s.exponent) || !std::isfinite(s.intercept))
        throw Error("synth", "scenario path-loss truth must be finite with a positive reference distance");
    if (!(s.noise_var >= 0.0) || !(s.fading_variance >= 0.0) || !(s.measurement_noise_var >= 0.0))
        throw Error("synth", "scenario variances must be non-negative");
    if (s.fading_variance > 0.0 && !(s.shadow_ratio > 0.0 && s.shadow_ratio <= 1.0))
        throw Error("synth", "shadow_ratio must lie in (0, 1]");
    if (s.node_count < 2)
        throw Error("synth", "scenario needs at least two nodes");
    if (s.link_policy == LinkPolicy::bipartite && (s.n_receivers == 0 || s.n_receivers >= s.node_count))
        throw Error("synth", "bipartite policy needs 0 < n_receivers < node_count");
    if (s.link_policy == LinkPolicy::random_pairs &&
        (s.link_count == 0 || s.link_count > s.node_count * (s.node_count - 1) / 2))
        throw Error("synth", "random_pairs link_count must be between 1 and the number of node pairs");
    if (!(s.wavelength > 0.0))
        throw Error("synth", "wavelength must be positive");
}

struct SyntheticData
{
    std::vector<MeasurementRecord> records;
    PixelGrid grid;
    Eigen::VectorXd true_field;
    std::vector<double> true_shadowing; ///< (W p)_l per record
    double sigma_x_sq = 0.0;            ///< effective prior variance after calibration
    double noise_var = 0.0;             ///< effective i.i.d. noise variance
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline std::vector<Point2D> place_nodes(const SyntheticScenario& s, std::mt19937_64& rng)
{
    std::vector<Point2D> nodes;
    nodes.reserve(s.node_count);
    if (s.placement == NodePlacement::lattice) {
        const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(s.node_count) * s.width / s.height)));
        const std::size_t rows = (s.node_count + cols - 1) / cols;
        for (std::size_t i = 0; i < s.node_count; ++i) {
            const double fx = (static_cast<double>(i % cols) + 0.5) / static_cast<double>(cols);
            const double fy = (static_cast<double>(i / cols) + 0.5) / static_cast<double>(rows);
            nodes.push_back({fx * s.width, fy * s.height});
        }
        return nodes;
    }
    std::uniform_real_distribution<double> ux(0.0, s.width), uy(0.0, s.height);
    for (std::size_t i = 0; i < s.node_count; ++i) {
        const double x = ux(rng);
        nodes.push_back({x, uy(rng)});
    }
    return nodes;
}

inline std::vector<std::pair<std::size_t, std::size_t>> link_pairs(const SyntheticScenario& s, std::mt19937_64& rng)
{
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    switch (s.link_policy) {
    case LinkPolicy::bipartite:
        for (std::size_t t = s.n_receivers; t < s.node_count; ++t)
            for (std::size_t r = 0; r < s.n_receivers; ++r)
                pairs.emplace_back(t, r);
        break;
    case LinkPolicy::all_pairs:
    case LinkPolicy::random_pairs:
        for (std::size_t i = 0; i < s.node_count; ++i)
            for (std::size_t j = i + 1; j < s.node_count; ++j)
                pairs.emplace_back(i, j);
        if (s.link_policy == LinkPolicy::random_pairs) {
            // Partial Fisher-Yates with an explicit index draw, independent of
            // the standard library's shuffle implementation.
            for (std::size_t k = 0; k < s.link_count; ++k) {
                std::uniform_int_distribution<std::size_t> pick(k, pairs.size() - 1);
                std::swap(pairs[k], pairs[pick(rng)]);
            }
            pairs.resize(s.link_count);
        }
        break;
    }
    return pairs;
}

} // namespace detail

/// Forward model: rss = mean power - (W p)_l - n_l, with n_l ~ N(0, noise_var).
inline SyntheticData generate_synthetic(const SyntheticScenario& s)
{
    validate(s);
    SyntheticData out;
    out.grid = s.grid();

    std::mt19937_64 rng(detail::derive_seed(s.seed, 1));
    const std::vector<Point2D> nodes = detail::place_nodes(s, rng);
    const auto pairs = detail::link_pairs(s, rng);

    const FieldPrior truth{s.sigma_x_sq, s.space_constant, out.grid};
    out.true_field = sample_field(truth, detail::derive_seed(s.seed, 2));
    out.sigma_x_sq = s.sigma_x_sq;

    // Geometry first; links with coincident endpoints cannot occur for
    // distinct continuous draws but are skipped defensively for lattices.
    std::vector<Link> links;
    links.reserve(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [i, j] = pairs[k];
        if (nodes[i] == nodes[j])
            continue;
        links.emplace_back(nodes[i], nodes[j], 0.0, "n" + std::to_string(i) + "-n" + std::to_string(j));
    }
    if (links.empty())
        throw Error("synth", "scenario produced no links");

    const WeightMatrix w = build_weight_matrix(links, out.grid, s.excess_length);
    Eigen::VectorXd shadow = w.matrix() * out.true_field;

    double noise_var = s.noise_var;
    if (s.fading_variance > 0.0) {
        const double shadow_var = detail::centered_variance(shadow);
        if (!(shadow_var > 0.0))
            throw Error("synth", "true field casts no shadow on any link; cannot calibrate variances");
        const double scale = std::sqrt(s.shadow_ratio * s.fading_variance / shadow_var);
        out.true_field *= scale;
        shadow *= scale;
        out.sigma_x_sq = s.sigma_x_sq * scale * scale;
        noise_var = (1.0 - s.shadow_ratio) * s.fading_variance;
    }
    out.noise_var = noise_var;

    std::normal_distribution<double> normal;
    const LogDistanceModel pl = s.pathloss();
    const double noise_sd = std::sqrt(noise_var);
    for (std::size_t l = 0; l < links.size(); ++l) {
        const double x = shadow[static_cast<Eigen::Index>(l)];
        const double rss = predict_mean_power(pl, links[l]) - x - noise_sd * normal(rng);
        out.records.push_back({Link(links[l].tx(), links[l].rx(), rss, links[l].id()), std::nullopt});
        out.true_shadowing.push_back(x);
    }

    if (s.stationary_samples > 0 || s.sub_wavelength_samples > 0) {
        // Repeated samples reuse the first link's geometry and true shadowing.
        const Link& base = links.front();
        const double x = shadow[0];
        const double meas_sd = std::sqrt(s.measurement_noise_var);
        const double small_scale_sd = std::sqrt(std::max(0.0, noise_var - s.measurement_noise_var));
        for (std::size_t k = 0; k < s.stationary_samples; ++k) {
            const double rss = predict_mean_power(pl, base) - x - meas_sd * normal(rng);
            out.records.push_back({Link(base.tx(), base.rx(), rss, base.id() + "-stationary"), GroupTag::stationary});
            out.true_shadowing.push_back(x);
        }
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t k = 0; k < s.sub_wavelength_samples; ++k) {
            const double r = s.wavelength * std::sqrt(unit(rng));
            const double theta = 2.0 * 3.14159265358979323846 * unit(rng);
            const Point2D tx{base.tx().x + r * std::cos(theta), base.tx().y + r * std::sin(theta)};
            const Link moved(tx, base.rx(), 0.0);
            const double rss = predict_mean_power(pl, moved) - x - small_scale_sd * normal(rng);
            out.records.push_back({Link(tx, base.rx(), rss, base.id() + "-rotating"), GroupTag::sub_wavelength});
            out.true_shadowing.push_back(x);
        }
    }
    return out;
}

/// Site-scale presets: "indoor-like" (17.5 x 15 m office, 44 nodes, all pairs)
/// and "outdoor-like" (2200 x 2100 m campus, 5 receivers). Each carries the
/// tuned hyperparameters for its site type and calibrates the synthetic
/// fading variance to the training variance observed at such sites.
inline std::vector<SyntheticScenario> scenario_presets()
{
    SyntheticScenario indoor;
    indoor.name = "indoor-like";
    indoor.width = 17.5;
    indoor.height = 15.0;
    indoor.pixel_width = 0.35;
    indoor.space_constant = 2.5;
    indoor.excess_length = 0.18;
    indoor.exponent = 2.26;
    indoor.intercept = -37.04;
    indoor.fading_variance = 19.8;
    indoor.shadow_ratio = 0.30;
    indoor.node_count = 44;
    indoor.link_policy = LinkPolicy::all_pairs;
    indoor.hyper = {0.35, 0.30, 2.5, 0.18, 41.0};
    indoor.seed = 2007;

    SyntheticScenario outdoor;
    outdoor.name = "outdoor-like";
    outdoor.width = 2200.0;
    outdoor.height = 2100.0;
    outdoor.pixel_width = 25.0;
    outdoor.space_constant = 35.0;
    outdoor.excess_length = 105.0;
    outdoor.exponent = 2.73;
    outdoor.intercept = -1.25;
    outdoor.fading_variance = 58.4;
    outdoor.shadow_ratio = 0.58;
    outdoor.node_count = 405;
    outdoor.link_policy = LinkPolicy::bipartite;
    outdoor.n_receivers = 5;
    outdoor.hyper = {25.0, 0.58, 35.0, 105.0, 0.3};
    outdoor.seed = 2022;

    return {indoor, outdoor};
}

inline SyntheticScenario scenario_preset(std::string_view name)
{
    std::string names;
    for (const auto& s : scenario_presets()) {
        if (s.name == name)
            return s;
        names += (names.empty() ? "" : ", ") + s.name;
    }
    throw Error("synth", "unknown scenario preset '" + std::string(name) + "'; available: " + names);
}

/// Scenario from key=value pairs. `preset=<name>` seeds the defaults; every
/// other key overrides one field. Unknown keys are rejected.
inline SyntheticScenario parse_scenario(const text::KeyValues& kv)
{
    SyntheticScenario s;
    if (const auto it = kv.find("preset"); it != kv.end())
        s = scenario_preset(it->second);
    for (const auto& [key, value] : kv) {
        const auto num = [&] {
            const auto v = text::parse_double(value);
            if (!v)
                throw Error("synth", "scenario key '" + key + "' is not a number: '" + value + "'");
            return *v;
        };
        const auto count = [&] {
            const auto v = text::parse_integer<std::size_t>(value);
            if (!v)
                throw Error("synth", "scenario key '" + key + "' is not a count: '" + value + "'");
            return *v;
        };
        if (key == "preset") continue;
        else if (key == "name") s.name = value;
        else if (key == "width") s.width = num();
        else if (key == "height") s.height = num();
        else if (key == "pixel_width") s.pixel_width = num();
        else if (key == "sigma_x_sq") s.sigma_x_sq = num();
        else if (key == "space_constant") s.space_constant = num();
        else if (key == "excess_length") s.excess_length = num();
        else if (key == "exponent") s.exponent = num();
        else if (key == "intercept") s.intercept = num();
        else if (key == "ref_distance") s.ref_distance = num();
        else if (key == "noise_var") s.noise_var = num();
        else if (key == "fading_variance") s.fading_variance = num();
        else if (key == "shadow_ratio") s.shadow_ratio = num();
        else if (key == "node_count") s.node_count = count();
        else if (key == "n_receivers") s.n_receivers = count();
        else if (key == "link_count") s.link_count = count();
        else if (key == "stationary_samples") s.stationary_samples = count();
        else if (key == "sub_wavelength_samples") s.sub_wavelength_samples = count();
        else if (key == "measurement_noise_var") s.measurement_noise_var = num();
        else if (key == "wavelength") s.wavelength = num();
        else if (key == "seed") {
            const auto v = text::parse_integer<std::uint64_t>(value);
            if (!v)
                throw Error("synth", "scenario seed must be a non-negative integer");
            s.seed = *v;
        }
        else if (key == "placement") {
            if (value == "uniform") s.placement = NodePlacement::uniform;
            else if (value == "lattice") s.placement = NodePlacement::lattice;
            else throw Error("synth", "placement must be uniform or lattice");
        } else if (key == "link_policy") {
            if (value == "all_pairs") s.link_policy = LinkPolicy::all_pairs;
            else if (value == "bipartite") s.link_policy = LinkPolicy::bipartite;
            else if (value == "random_pairs") s.link_policy = LinkPolicy::random_pairs;
            else throw Error("synth", "link_policy must be all_pairs, bipartite or random_pairs");
        } else
            throw Error("synth", "unknown scenario key '" + key + "'");
    }
    validate(s);
    return s;
}

} // namespace celf

#endif // CELF_DATASET_HPP
