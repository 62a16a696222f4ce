#ifndef CELF_TOOLS_COMMANDS_HPP
#define CELF_TOOLS_COMMANDS_HPP

// Subcommand implementations for the `celf` tool. Each command writes its
// human-readable summary to `out` and its artifacts to the requested paths.

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "celf/celf.hpp"

namespace celf::cli {

/// Flags shared by the pipeline commands; set fields override the config file.
struct CommonOptions
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> solver;
    std::optional<double> ratio;
};

inline Config resolve_config(const CommonOptions& o)
{
    Config c;
    if (!o.config_path.empty())
        apply_config(c, text::read_key_values(o.config_path, "config"));
    if (o.seed)
        c.seed = *o.seed;
    if (o.solver) {
        const auto s = parse_solver_choice(*o.solver);
        if (!s)
            throw Error("config", "--solver must be auto, map or mne");
        c.solver = *s;
    }
    if (o.ratio)
        c.split_ratio = *o.ratio;
    c.validate();
    return c;
}

inline std::string fmt(const char* format, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

inline LoadResult load_dataset(const std::string& path, std::ostream& out, const LoadOptions& opts = {})
{
    LoadResult data = load_csv(path, opts);
    for (const RejectedRow& r : data.rejected)
        out << "rejected " << path << ":" << r.line << ": " << r.reason << '\n';
    if (!data.rejected.empty())
        out << "rejected_rows=" << data.rejected.size() << '\n';
    if (data.records.empty())
        throw Error("load", path + ": no valid measurement rows");
    return data;
}

// --- fit --------------------------------------------------------------------

inline void cmd_fit(const std::string& dataset, const CommonOptions& common, const std::string& out_path,
                    std::ostream& out)
{
    const Config cfg = resolve_config(common);
    const LoadResult data = load_dataset(dataset, out);
    const std::vector<Link> links = links_of(data.records);
    const LogDistanceModel pl = fit_log_distance(links, cfg.ref_distance);
    const std::vector<double> z = fading_losses(pl, links);

    std::string report;
    report += "links=" + std::to_string(links.size()) + '\n';
    report += "exponent=" + text::format_double(pl.exponent) + '\n';
    report += "intercept_db=" + text::format_double(pl.intercept) + '\n';
    report += "ref_distance_m=" + text::format_double(pl.ref_distance) + '\n';
    report += "fading_variance_db2=" + text::format_double(mean_square(z)) + '\n';
    out << report;
    if (!out_path.empty()) {
        auto f = text::open_output(out_path, "fit");
        f << report;
    }
}

// --- train ------------------------------------------------------------------

struct TrainPaths
{
    std::string model_out;
    std::string test_out;
    std::string timing_out;
};

inline TrainResult run_training(const std::vector<Link>& train_links, const std::vector<Link>& all_links,
                                const Config& cfg)
{
    const LogDistanceModel pl = fit_log_distance(train_links, cfg.ref_distance);
    // The grid depends only on endpoint geometry, so it spans every link in
    // the dataset and held-out links stay inside it.
    const PixelGrid grid = grid_from_links(all_links, cfg.hyper.pixel_width, cfg.margin);
    return train(train_links, cfg.hyper, pl, grid, {cfg.solver, cfg.memory_budget_bytes});
}

inline void print_train_summary(std::ostream& out, const TrainResult& tr, const EvalReport& train_eval,
                                const std::optional<EvalReport>& test_eval)
{
    const CelfModel& m = tr.model;
    out << "train_links=" << m.diagnostics.n_links << '\n';
    out << "pixels=" << m.diagnostics.n_pixels << " (" << m.grid.n_cols() << "x" << m.grid.n_rows() << ")\n";
    out << "solver_path=" << to_string(m.solver_path) << '\n';
    out << "exponent=" << text::format_double(m.pathloss.exponent) << '\n';
    out << "intercept_db=" << text::format_double(m.pathloss.intercept) << '\n';
    out << "sigma_x_sq=" << text::format_double(m.prior.sigma_x_sq) << '\n';
    out << "relative_residual=" << fmt("%.3e", tr.report.relative_residual) << '\n';
    out << "jitter_applied=" << (tr.report.jitter_applied ? 1 : 0) << '\n';
    out << "empty_training_rows=" << m.diagnostics.empty_rows << '\n';
    if (m.diagnostics.degenerate)
        out << "warning: no training link covers any pixel; field left at zero\n";
    out << "train_fading_variance_db2=" << fmt("%.4f", train_eval.fading_variance) << '\n';
    out << "train_error_variance_db2=" << fmt("%.4f", train_eval.error_variance) << '\n';
    out << "train_variance_reduction_pct=" << fmt("%.3f", train_eval.variance_reduction) << '\n';
    if (test_eval) {
        out << "test_links=" << test_eval->n << '\n';
        out << "test_variance_reduction_pct=" << fmt("%.3f", test_eval->variance_reduction) << '\n';
    }
}

inline void cmd_train(const std::string& dataset, const CommonOptions& common, const TrainPaths& paths,
                      std::ostream& out)
{
    if (paths.model_out.empty())
        throw Error("train", "--out <model file> is required");
    const Config cfg = resolve_config(common);
    const LoadResult data = load_dataset(dataset, out);
    const auto split = split_train_test(data.records, cfg.split_ratio, cfg.seed);
    if (split.train.size() < 2)
        throw Error("split", "training split has fewer than two links");
    const std::vector<Link> train_links = links_of(split.train);
    const std::vector<Link> all_links = links_of(data.records);

    const TrainResult tr = run_training(train_links, all_links, cfg);
    save_model(paths.model_out, tr.model);
    if (!paths.test_out.empty())
        save_csv(paths.test_out, split.test);
    if (!paths.timing_out.empty()) {
        auto f = text::open_output(paths.timing_out, "train");
        write_timing_csv(f, tr.report.timings);
    }

    std::optional<EvalReport> test_eval;
    if (!split.test.empty())
        test_eval = evaluate(tr.model, links_of(split.test));
    print_train_summary(out, tr, evaluate(tr.model, train_links), test_eval);
    out << "model=" << paths.model_out << '\n';
}

// --- predict ----------------------------------------------------------------

inline void cmd_predict(const std::string& model_path, const std::string& links_csv, const std::string& out_path,
                        std::ostream& out)
{
    if (out_path.empty())
        throw Error("predict", "--out <predictions csv> is required");
    const CelfModel model = load_model(model_path);
    const LoadResult data = load_dataset(links_csv, out, LoadOptions{false});
    const std::vector<Link> links = links_of(data.records);
    const ShadowingPrediction s = predict_shadowing(model, links);

    auto f = text::open_output(out_path, "predict");
    f << "index,link_id,distance_m,mean_power_dbm,shadowing_db,predicted_power_dbm,out_of_coverage\n";
    std::size_t flagged = 0;
    for (std::size_t l = 0; l < links.size(); ++l) {
        const double mean = predict_mean_power(model.pathloss, links[l]);
        const double shadow = s.shadowing[static_cast<Eigen::Index>(l)];
        flagged += s.out_of_coverage[l] ? 1 : 0;
        f << l << ',' << links[l].id() << ',' << text::format_double(links[l].length()) << ','
          << text::format_double(mean) << ',' << text::format_double(shadow) << ','
          << text::format_double(mean - shadow) << ',' << (s.out_of_coverage[l] ? 1 : 0) << '\n';
    }
    out << "predicted_links=" << links.size() << '\n';
    out << "out_of_coverage=" << flagged << '\n';
    out << "predictions=" << out_path << '\n';
}

// --- evaluate ---------------------------------------------------------------

inline void cmd_evaluate(const std::string& model_path, const std::string& test_csv, const CommonOptions& common,
                         const std::string& out_prefix, bool with_hata, std::ostream& out)
{
    const Config cfg = resolve_config(common);
    const CelfModel model = load_model(model_path);
    const LoadResult data = load_dataset(test_csv, out);
    const std::vector<Link> links = links_of(data.records);

    std::vector<std::pair<std::string, EvalReport>> reports;
    reports.emplace_back("celf", evaluate(model, links));
    if (with_hata)
        reports.emplace_back("okumura_hata", evaluate_baseline_hata(cfg.hata, model.pathloss, links));

    if (!out_prefix.empty()) {
        auto csv = text::open_output(out_prefix + ".csv", "evaluate");
        write_eval_csv(csv, reports);
        auto txt = text::open_output(out_prefix + ".txt", "evaluate");
        write_eval_text(txt, reports);
        auto res = text::open_output(out_prefix + "_residuals.csv", "evaluate");
        write_residuals_csv(res, reports.front().second);
    }
    write_eval_text(out, reports);
    if (data.has_group_tags) {
        VarianceBound b;
        try {
            b = grouped_variance_bound(data.records, model.pathloss, reports.front().second.fading_variance);
        } catch (const Error& e) {
            out << "noise_floor unavailable: " << e.what() << '\n';
            return;
        }
        out << "noise_floor stationary=" << fmt("%.4f", b.stationary) << " sub_wavelength=" << fmt("%.4f", b.sub_wavelength)
            << " sum=" << fmt("%.4f", b.sum) << " implied_max_reduction_pct=" << fmt("%.2f", b.implied_max_reduction)
            << '\n';
    }
}

// --- tune -------------------------------------------------------------------

inline void cmd_tune(const std::string& dataset, const std::string& grid_path, const CommonOptions& common,
                     const std::string& table_out, const std::string& retrain_out, unsigned threads, std::ostream& out)
{
    if (grid_path.empty())
        throw Error("tune", "--grid <grid spec> is required");
    Config cfg = resolve_config(common);
    GridSearchSpec spec = parse_grid_spec(text::read_key_values(grid_path, "tune"));
    // Hyperparameters absent from the grid stay at their configured value.
    const GridSearchSpec fallback = single_point_grid(cfg.hyper);
    if (spec.pixel_width.empty()) spec.pixel_width = fallback.pixel_width;
    if (spec.shadow_ratio.empty()) spec.shadow_ratio = fallback.shadow_ratio;
    if (spec.space_constant.empty()) spec.space_constant = fallback.space_constant;
    if (spec.excess_length.empty()) spec.excess_length = fallback.excess_length;
    if (spec.alpha.empty()) spec.alpha = fallback.alpha;

    const LoadResult data = load_dataset(dataset, out);
    const auto split = split_train_test(data.records, cfg.split_ratio, cfg.seed);
    const std::vector<Link> train_links = links_of(split.train);

    CvOptions opts;
    opts.margin = cfg.margin;
    opts.ref_distance = cfg.ref_distance;
    opts.solver = cfg.solver;
    opts.memory_budget_bytes = cfg.memory_budget_bytes;
    opts.threads = threads;
    const CvResult cv = cross_validate(train_links, spec, opts);

    if (!table_out.empty()) {
        auto f = text::open_output(table_out, "tune");
        write_cv_csv(f, cv);
    }
    out << "combinations=" << cv.aggregates.size() << " folds=" << spec.folds << '\n';
    const Hyperparameters& b = cv.best;
    out << "best pixel_width=" << text::format_double(b.pixel_width) << " shadow_ratio=" << text::format_double(b.shadow_ratio)
        << " space_constant=" << text::format_double(b.space_constant)
        << " excess_length=" << text::format_double(b.excess_length) << " alpha=" << text::format_double(b.alpha) << '\n';
    out << "best_cv_variance_reduction_pct=" << fmt("%.3f", cv.aggregates[cv.best_combination].mean_reduction) << '\n';

    if (!retrain_out.empty()) {
        cfg.hyper = b;
        const TrainResult tr = run_training(train_links, links_of(data.records), cfg);
        save_model(retrain_out, tr.model);
        out << "retrained_model=" << retrain_out << '\n';
    }
}

// --- synth ------------------------------------------------------------------

inline void cmd_synth(const std::string& preset, const std::string& scenario_path, std::optional<std::uint64_t> seed,
                      const std::string& out_prefix, std::ostream& out)
{
    if (out_prefix.empty())
        throw Error("synth", "--out <prefix> is required");
    if (preset.empty() == scenario_path.empty())
        throw Error("synth", "give exactly one of --preset or --scenario");
    SyntheticScenario s = preset.empty() ? parse_scenario(text::read_key_values(scenario_path, "synth"))
                                         : scenario_preset(preset);
    if (seed)
        s.seed = *seed;
    const SyntheticData data = generate_synthetic(s);

    save_csv(out_prefix + ".csv", data.records);
    {
        auto f = text::open_output(out_prefix + "_truth_field.csv", "synth");
        write_field_csv(f, data.grid, data.true_field);
    }
    {
        auto f = text::open_output(out_prefix + "_truth_links.csv", "synth");
        f << "index,link_id,true_shadowing_db\n";
        for (std::size_t i = 0; i < data.records.size(); ++i)
            f << i << ',' << data.records[i].link.id() << ',' << text::format_double(data.true_shadowing[i]) << '\n';
    }
    out << "scenario=" << s.name << '\n';
    out << "seed=" << s.seed << '\n';
    out << "records=" << data.records.size() << '\n';
    out << "pixels=" << data.grid.size() << " (" << data.grid.n_cols() << "x" << data.grid.n_rows() << ")\n";
    out << "sigma_x_sq=" << text::format_double(data.sigma_x_sq) << '\n';
    out << "noise_var=" << text::format_double(data.noise_var) << '\n';
    out << "suggested pixel_width=" << text::format_double(s.hyper.pixel_width)
        << " shadow_ratio=" << text::format_double(s.hyper.shadow_ratio)
        << " space_constant=" << text::format_double(s.hyper.space_constant)
        << " excess_length=" << text::format_double(s.hyper.excess_length)
        << " alpha=" << text::format_double(s.hyper.alpha) << '\n';
}

// --- export-field -----------------------------------------------------------

inline void cmd_export_field(const std::string& model_path, const std::string& out_prefix, std::ostream& out)
{
    if (out_prefix.empty())
        throw Error("export", "--out <prefix> is required");
    const CelfModel model = load_model(model_path);
    const GrayMapping map = gray_mapping(model.field);
    {
        auto f = text::open_output(out_prefix + ".csv", "export");
        write_field_csv(f, model.grid, model.field);
    }
    {
        auto f = text::open_output(out_prefix + ".pgm", "export");
        write_pgm(f, model.grid, model.field, map);
    }
    {
        auto f = text::open_output(out_prefix + ".pgm.txt", "export");
        write_pgm_sidecar(f, model.grid, map);
    }
    out << "pixels=" << model.grid.size() << '\n';
    out << "min_db=" << text::format_double(map.min) << '\n';
    out << "max_db=" << text::format_double(map.max) << '\n';
    out << "files=" << out_prefix << ".csv " << out_prefix << ".pgm " << out_prefix << ".pgm.txt\n";
}

} // namespace celf::cli

#endif // CELF_TOOLS_COMMANDS_HPP
