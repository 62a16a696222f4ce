#ifndef CELF_CONFIG_HPP
#define CELF_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "celf/error.hpp"
#include "celf/estimator.hpp"
#include "celf/pathloss.hpp"
#include "celf/text.hpp"

namespace celf {

/// Pipeline settings read from a flat key=value file. Every key is optional;
/// unknown keys are rejected.
///
///   pixel_width, shadow_ratio, space_constant, excess_length, alpha
///   margin            grid margin around the link endpoints (m)
///   ref_distance      log-distance reference distance (m)
///   solver            auto | map | mne
///   seed              split seed
///   split_ratio       training fraction
///   memory_budget_mb  dense-matrix budget
///   hata.frequency_mhz, hata.tx_height_m, hata.rx_height_m,
///   hata.environment  urban_medium | urban_large | suburban | open
struct Config
{
    Hyperparameters hyper{0.35, 0.30, 2.5, 0.18, 41.0};
    double margin = 0.0;
    double ref_distance = 1.0;
    SolverChoice solver = SolverChoice::automatic;
    std::uint64_t seed = 1;
    double split_ratio = 0.7;
    std::size_t memory_budget_bytes = kDefaultMemoryBudgetBytes;
    HataParams hata;

    void validate() const
    {
        celf::validate(hyper);
        if (!(margin >= 0.0))
            throw Error("config", "margin must be non-negative");
        if (!(ref_distance > 0.0))
            throw Error("config", "ref_distance must be positive");
        if (!(split_ratio > 0.0 && split_ratio < 1.0))
            throw Error("config", "split_ratio must lie strictly between 0 and 1");
        celf::validate(hata);
    }
};

inline void apply_config(Config& c, const text::KeyValues& kv)
{
    for (const auto& [key, value] : kv) {
        const auto num = [&] {
            const auto v = text::parse_double(value);
            if (!v)
                throw Error("config", "key '" + key + "' is not a number: '" + value + "'");
            return *v;
        };
        if (key == "pixel_width") c.hyper.pixel_width = num();
        else if (key == "shadow_ratio") c.hyper.shadow_ratio = num();
        else if (key == "space_constant") c.hyper.space_constant = num();
        else if (key == "excess_length") c.hyper.excess_length = num();
        else if (key == "alpha") c.hyper.alpha = num();
        else if (key == "margin") c.margin = num();
        else if (key == "ref_distance") c.ref_distance = num();
        else if (key == "split_ratio") c.split_ratio = num();
        else if (key == "solver") {
            const auto s = parse_solver_choice(value);
            if (!s)
                throw Error("config", "solver must be auto, map or mne");
            c.solver = *s;
        } else if (key == "seed") {
            const auto v = text::parse_integer<std::uint64_t>(value);
            if (!v)
                throw Error("config", "seed must be a non-negative integer");
            c.seed = *v;
        } else if (key == "memory_budget_mb") {
            const auto v = text::parse_integer<std::size_t>(value);
            if (!v || *v == 0)
                throw Error("config", "memory_budget_mb must be a positive integer");
            c.memory_budget_bytes = *v << 20;
        } else if (key == "hata.frequency_mhz") c.hata.frequency_mhz = num();
        else if (key == "hata.tx_height_m") c.hata.tx_height_m = num();
        else if (key == "hata.rx_height_m") c.hata.rx_height_m = num();
        else if (key == "hata.environment") {
            const auto e = parse_hata_environment(value);
            if (!e)
                throw Error("config", "hata.environment must be urban_medium, urban_large, suburban or open");
            c.hata.environment = *e;
        } else
            throw Error("config", "unknown config key '" + key + "'");
    }
}

inline Config load_config(const std::string& path)
{
    Config c;
    apply_config(c, text::read_key_values(path, "config"));
    c.validate();
    return c;
}

} // namespace celf

#endif // CELF_CONFIG_HPP
