#ifndef CELF_PATHLOSS_HPP
#define CELF_PATHLOSS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "celf/error.hpp"
#include "celf/geometry.hpp"

namespace celf {

/// Log-distance mean received power:
///   P(d) = intercept - 10 n_p log10(d / ref_distance)
/// where `intercept` is the combined P_T - Pi_0 at the reference distance.
struct LogDistanceModel
{
    double intercept = 0.0;
    double exponent = 2.0;
    double ref_distance = 1.0;
};

inline double predict_mean_power(const LogDistanceModel& model, double distance_m) noexcept
{
    return model.intercept - 10.0 * model.exponent * std::log10(distance_m / model.ref_distance);
}

inline double predict_mean_power(const LogDistanceModel& model, const Link& link) noexcept
{
    return predict_mean_power(model, link.length());
}

/// Total fading loss Z_l = mean power - measured power. Positive when the link
/// is weaker than the model mean.
inline double fading_loss(const LogDistanceModel& model, const Link& link) noexcept
{
    return predict_mean_power(model, link) - link.rss();
}

inline std::vector<double> fading_losses(const LogDistanceModel& model, std::span<const Link> links)
{
    std::vector<double> z;
    z.reserve(links.size());
    for (const Link& link : links)
        z.push_back(fading_loss(model, link));
    return z;
}

/// Ordinary least squares of rss against -10 log10(d / ref_distance).
inline LogDistanceModel fit_log_distance(std::span<const Link> links, double ref_distance = 1.0)
{
    if (!(ref_distance > 0.0))
        throw Error("fit", "reference distance must be positive");
    if (links.size() < 2)
        throw Error("fit", "log-distance fit needs at least two links");

    const double n = static_cast<double>(links.size());
    double mean_x = 0.0, mean_y = 0.0;
    std::vector<double> xs;
    xs.reserve(links.size());
    for (const Link& link : links) {
        xs.push_back(-10.0 * std::log10(link.length() / ref_distance));
        mean_x += xs.back();
        mean_y += link.rss();
    }
    mean_x /= n;
    mean_y /= n;

    double sxx = 0.0, sxy = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < links.size(); ++i) {
        const double dx = xs[i] - mean_x;
        sxx += dx * dx;
        sxy += dx * (links[i].rss() - mean_y);
        scale = std::max(scale, std::abs(xs[i]));
    }
    if (sxx <= 1e-24 * std::max(1.0, scale * scale) * n)
        throw Error("fit", "all links have the same length; path-loss exponent is not identifiable");

    LogDistanceModel model;
    model.exponent = sxy / sxx;
    model.intercept = mean_y - model.exponent * mean_x;
    model.ref_distance = ref_distance;
    return model;
}

// ---------------------------------------------------------------------------
// Okumura-Hata

enum class HataEnvironment
{
    urban_medium, ///< medium/small city mobile-antenna correction
    urban_large,
    suburban,
    open,
};

inline std::string_view to_string(HataEnvironment env) noexcept
{
    switch (env) {
    case HataEnvironment::urban_medium: return "urban_medium";
    case HataEnvironment::urban_large: return "urban_large";
    case HataEnvironment::suburban: return "suburban";
    case HataEnvironment::open: return "open";
    }
    return "urban_medium";
}

inline std::optional<HataEnvironment> parse_hata_environment(std::string_view s) noexcept
{
    for (auto env : {HataEnvironment::urban_medium, HataEnvironment::urban_large, HataEnvironment::suburban,
                     HataEnvironment::open})
        if (s == to_string(env))
            return env;
    return std::nullopt;
}

struct HataParams
{
    double frequency_mhz = 462.7;
    double tx_height_m = 30.0; ///< base station antenna height h_b
    double rx_height_m = 1.5;  ///< mobile antenna height h_m
    HataEnvironment environment = HataEnvironment::urban_medium;
};

inline void validate(const HataParams& p)
{
    if (!(p.frequency_mhz >= 150.0 && p.frequency_mhz <= 1500.0))
        throw Error("hata", "Okumura-Hata frequency must lie in [150, 1500] MHz, got " + std::to_string(p.frequency_mhz));
    if (!(p.tx_height_m > 0.0) || !(p.rx_height_m > 0.0))
        throw Error("hata", "Okumura-Hata antenna heights must be positive");
}

/// True when `distance_km` lies in the model's nominal 1-20 km range.
inline bool hata_distance_in_range(double distance_km) noexcept
{
    return distance_km >= 1.0 && distance_km <= 20.0;
}

/// Hata (1980) median path loss in dB. Distances outside 1-20 km are
/// extrapolated; check hata_distance_in_range() to flag them.
inline double hata_path_loss(const HataParams& p, double distance_km)
{
    validate(p);
    if (!(distance_km > 0.0))
        throw Error("hata", "Okumura-Hata distance must be positive");

    const double log_f = std::log10(p.frequency_mhz);
    const double log_hb = std::log10(p.tx_height_m);
    const double hm = p.rx_height_m;

    const double small_city_ahm = (1.1 * log_f - 0.7) * hm - (1.56 * log_f - 0.8);
    double ahm = small_city_ahm;
    if (p.environment == HataEnvironment::urban_large) {
        if (p.frequency_mhz < 300.0) {
            const double t = std::log10(1.54 * hm);
            ahm = 8.29 * t * t - 1.1;
        } else {
            const double t = std::log10(11.75 * hm);
            ahm = 3.2 * t * t - 4.97;
        }
    }

    const double urban = 69.55 + 26.16 * log_f - 13.82 * log_hb - ahm + (44.9 - 6.55 * log_hb) * std::log10(distance_km);

    switch (p.environment) {
    case HataEnvironment::suburban: {
        const double t = std::log10(p.frequency_mhz / 28.0);
        return urban - 2.0 * t * t - 5.4;
    }
    case HataEnvironment::open:
        return urban - 4.78 * log_f * log_f + 18.33 * log_f - 40.94;
    default:
        return urban;
    }
}

} // namespace celf

#endif // CELF_PATHLOSS_HPP
