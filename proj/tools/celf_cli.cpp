// celf: command-line front end for training and applying loss-field models.

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

void add_common(CLI::App* sub, celf::cli::CommonOptions& o, bool with_ratio, bool with_solver)
{
    sub->add_option("--config", o.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "split / sampling seed");
    if (with_solver)
        sub->add_option("--solver", o.solver, "auto, map or mne")->check(CLI::IsMember({"auto", "map", "mne"}));
    if (with_ratio)
        sub->add_option("--ratio", o.ratio, "training fraction in (0, 1)");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Loss-field channel estimation"};
    app.require_subcommand(1);

    celf::cli::CommonOptions common;
    std::string input, second, out;

    auto* fit = app.add_subcommand("fit", "fit the log-distance path-loss model");
    fit->add_option("dataset", input, "measurement CSV")->required();
    fit->add_option("--out", out, "write the fitted parameters here");
    add_common(fit, common, false, false);

    celf::cli::TrainPaths train_paths;
    auto* train = app.add_subcommand("train", "split the dataset and train a model");
    train->add_option("dataset", input, "measurement CSV")->required();
    train->add_option("--out", train_paths.model_out, "model file")->required();
    train->add_option("--test-out", train_paths.test_out, "write the held-out links as CSV");
    train->add_option("--timing-out", train_paths.timing_out, "write per-phase timings as CSV");
    add_common(train, common, true, true);

    auto* predict = app.add_subcommand("predict", "predict received power for new links");
    predict->add_option("model", input, "model file")->required();
    predict->add_option("links", second, "link CSV (rss_dbm optional)")->required();
    predict->add_option("--out", out, "predictions CSV")->required();

    bool with_hata = false;
    auto* evaluate = app.add_subcommand("evaluate", "variance reduction on a test set");
    evaluate->add_option("model", input, "model file")->required();
    evaluate->add_option("test", second, "test CSV")->required();
    evaluate->add_option("--out", out, "report prefix (.csv, .txt, _residuals.csv)");
    evaluate->add_flag("--hata", with_hata, "add the Okumura-Hata baseline");
    add_common(evaluate, common, false, false);

    std::string grid_path, retrain_out;
    unsigned threads = 0;
    auto* tune = app.add_subcommand("tune", "k-fold cross-validated hyperparameter search");
    tune->add_option("dataset", input, "measurement CSV")->required();
    tune->add_option("--grid", grid_path, "grid specification file")->required();
    tune->add_option("--out", out, "CV table CSV");
    tune->add_option("--retrain", retrain_out, "retrain on the training split and save the model here");
    tune->add_option("--threads", threads, "worker threads (0 = all cores)");
    add_common(tune, common, true, true);

    std::string preset, scenario_path;
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--preset", preset, "indoor-like or outdoor-like");
    synth->add_option("--scenario", scenario_path, "scenario key=value file")->check(CLI::ExistingFile);
    synth->add_option("--seed", common.seed, "generator seed");
    synth->add_option("--out", out, "output prefix")->required();

    auto* export_field = app.add_subcommand("export-field", "write the field as CSV and PGM");
    export_field->add_option("model", input, "model file")->required();
    export_field->add_option("--out", out, "output prefix")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fit->parsed())
            celf::cli::cmd_fit(input, common, out, std::cout);
        else if (train->parsed())
            celf::cli::cmd_train(input, common, train_paths, std::cout);
        else if (predict->parsed())
            celf::cli::cmd_predict(input, second, out, std::cout);
        else if (evaluate->parsed())
            celf::cli::cmd_evaluate(input, second, common, out, with_hata, std::cout);
        else if (tune->parsed())
            celf::cli::cmd_tune(input, grid_path, common, out, retrain_out, threads, std::cout);
        else if (synth->parsed())
            celf::cli::cmd_synth(preset, scenario_path, common.seed, out, std::cout);
        else if (export_field->parsed())
            celf::cli::cmd_export_field(input, out, std::cout);
    } catch (const celf::Error& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
