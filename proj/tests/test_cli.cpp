#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "commands.hpp"

using namespace celf;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test
{
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("celf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& content) const
    {
        std::ofstream(path(name)) << content;
        return path(name);
    }

    static std::string slurp(const std::string& p)
    {
        std::ifstream in(p, std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    }

    std::string small_scenario(double noise = 2.0)
    {
        return write("scenario.txt", "width=8\nheight=8\npixel_width=0.5\nspace_constant=2\nexcess_length=0.4\n"
                                     "node_count=20\nsigma_x_sq=1\nnoise_var=" +
                                         text::format_double(noise) + "\nexponent=2.5\nintercept=-35\nseed=4\n");
    }

    std::string small_config()
    {
        return write("config.txt", "pixel_width=0.5\nshadow_ratio=0.5\nspace_constant=2\nexcess_length=0.4\nalpha=1\n");
    }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, SynthWritesDatasetAndTruth)
{
    std::ostringstream out;
    cli::cmd_synth("", small_scenario(), std::nullopt, path("site"), out);
    const auto data = load_csv(path("site.csv"));
    EXPECT_EQ(data.records.size(), 190u);
    std::ifstream truth(path("site_truth_field.csv"));
    const Eigen::VectorXd field = read_field_csv(truth);
    EXPECT_EQ(field.size(), 256);
    EXPECT_NE(out.str().find("records=190"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("site_truth_links.csv")));
}

TEST_F(CliTest, SynthNeedsExactlyOneSource)
{
    std::ostringstream out;
    EXPECT_THROW(cli::cmd_synth("", "", std::nullopt, path("x"), out), Error);
    EXPECT_THROW(cli::cmd_synth("indoor-like", small_scenario(), std::nullopt, path("x"), out), Error);
    EXPECT_THROW(cli::cmd_synth("nowhere", "", std::nullopt, path("x"), out), Error);
}

TEST_F(CliTest, FitRecoversNoiselessExponent)
{
    std::ostringstream out;
    const std::string sc = write("flat.txt", "node_count=15\nsigma_x_sq=1e-200\nexponent=2.73\nintercept=-1.25\n");
    cli::cmd_synth("", sc, std::nullopt, path("flat"), out);
    const LogDistanceModel pl = fit_log_distance(links_of(load_csv(path("flat.csv")).records));
    EXPECT_NEAR(pl.exponent, 2.73, 1e-9);
    std::ostringstream fit;
    cli::cmd_fit(path("flat.csv"), {}, path("fit.txt"), fit);
    const auto at = fit.str().find("exponent=");
    ASSERT_NE(at, std::string::npos);
    const auto printed = text::parse_double(fit.str().substr(at + 9, fit.str().find('\n', at) - at - 9));
    ASSERT_TRUE(printed);
    EXPECT_EQ(*printed, pl.exponent);
    EXPECT_EQ(slurp(path("fit.txt")), fit.str());
}

TEST_F(CliTest, EmptyDatasetFails)
{
    std::ostringstream out;
    write("empty.csv", "");
    EXPECT_THROW(cli::cmd_fit(path("empty.csv"), {}, "", out), Error);
    write("header.csv", "tx_x,tx_y,rx_x,rx_y,rss_dbm\n");
    EXPECT_THROW(cli::cmd_fit(path("header.csv"), {}, "", out), Error);
}

TEST_F(CliTest, TrainPredictMatchLibrary)
{
    std::ostringstream out;
    cli::cmd_synth("", small_scenario(), std::nullopt, path("site"), out);
    cli::CommonOptions common;
    common.config_path = small_config();
    cli::cmd_train(path("site.csv"), common, {path("model.txt"), path("test.csv"), path("timing.csv")}, out);

    const CelfModel model = load_model(path("model.txt"));
    const auto test_links = links_of(load_csv(path("test.csv")).records);
    ASSERT_FALSE(test_links.empty());
    cli::cmd_predict(path("model.txt"), path("test.csv"), path("pred.csv"), out);

    const Eigen::VectorXd power = predict_power(model, test_links);
    std::ifstream pred(path("pred.csv"));
    std::string line;
    std::getline(pred, line);
    EXPECT_EQ(line, "index,link_id,distance_m,mean_power_dbm,shadowing_db,predicted_power_dbm,out_of_coverage");
    std::size_t i = 0;
    while (std::getline(pred, line)) {
        const auto cells = text::split(line, ',');
        ASSERT_EQ(cells.size(), 7u);
        EXPECT_EQ(text::parse_double(cells[5]), power[static_cast<Eigen::Index>(i)]);
        ++i;
    }
    EXPECT_EQ(i, test_links.size());
    EXPECT_NE(slurp(path("timing.csv")).find("factorize"), std::string::npos);
}

TEST_F(CliTest, TrainPrintsTrainingReduction)
{
    std::ostringstream synth, out;
    cli::cmd_synth("", small_scenario(), std::nullopt, path("site"), synth);
    cli::CommonOptions common;
    common.config_path = small_config();
    common.seed = 3;
    cli::cmd_train(path("site.csv"), common, {path("model.txt"), path("test.csv"), ""}, out);

    const auto data = load_csv(path("site.csv"));
    const auto split = split_train_test(data.records, 0.7, 3);
    const EvalReport r = evaluate(load_model(path("model.txt")), links_of(split.train));
    EXPECT_NE(out.str().find("train_variance_reduction_pct=" + cli::fmt("%.3f", r.variance_reduction)),
              std::string::npos)
        << out.str();
}

TEST_F(CliTest, PredictFlagsOutOfGridLinks)
{
    std::ostringstream out;
    cli::cmd_synth("", small_scenario(), std::nullopt, path("site"), out);
    cli::CommonOptions common;
    common.config_path = small_config();
    cli::cmd_train(path("site.csv"), common, {path("model.txt"), "", ""}, out);
    write("far.csv", "tx_x,tx_y,rx_x,rx_y,link_id\n100,100,105,100,far\n1,1,6,6,near\n");
    cli::cmd_predict(path("model.txt"), path("far.csv"), path("pred.csv"), out);
    const std::string p = slurp(path("pred.csv"));
    EXPECT_NE(p.find(",far,5,"), std::string::npos);
    const auto first = p.substr(p.find("0,far"), p.find('\n', p.find("0,far")) - p.find("0,far"));
    EXPECT_EQ(first.substr(first.size() - 2), ",1");
    EXPECT_NE(first.find(",0,"), std::string::npos); // zero shadowing
}

TEST_F(CliTest, EvaluateNullModelScoresZero)
{
    std::ostringstream out;
    cli::cmd_synth("", small_scenario(), std::nullopt, path("site"), out);
    const auto links = links_of(load_csv(path("site.csv")).records);
    CelfModel m;
    m.pathloss = fit_log_distance(links);
    m.hyper = {0.5, 0.5, 2.0, 0.4, 1.0};
    m.grid = grid_from_links(links, 0.5);
    m.prior = {1.0, 2.0, m.grid};
    m.field = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.grid.size()));
    save_model(path("null.txt"), m);
    std::ostringstream ev;
    cli::cmd_evaluate(path("null.txt"), path("site.csv"), {}, path("ev"), false, ev);
    EXPECT_NE(ev.str().find("reduction=0.00%"), std::string::npos) << ev.str();
    EXPECT_NE(slurp(path("ev.csv")).find("celf,190,"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("ev_residuals.csv")));
}

TEST_F(CliTest, EvaluateAddsHataRow)
{
    std::ostringstream out;
    cli::cmd_synth("", small_scenario(), std::nullopt, path("site"), out);
    cli::CommonOptions common;
    common.config_path = small_config();
    cli::cmd_train(path("site.csv"), common, {path("model.txt"), path("test.csv"), ""}, out);
    std::ostringstream ev;
    cli::cmd_evaluate(path("model.txt"), path("test.csv"), {}, path("ev"), true, ev);
    const std::string csv = slurp(path("ev.csv"));
    EXPECT_NE(csv.find("\ncelf,"), std::string::npos);
    EXPECT_NE(csv.find("\nokumura_hata,"), std::string::npos);
}

TEST_F(CliTest, NoiseFloorReportedForTaggedData)
{
    std::ostringstream out;
    const std::string sc =
        write("tagged.txt", "node_count=12\nnoise_var=4\nmeasurement_noise_var=1\nstationary_samples=200\n"
                            "sub_wavelength_samples=200\nwavelength=0.1\n");
    cli::cmd_synth("", sc, std::nullopt, path("tagged"), out);
    const auto links = links_of(load_csv(path("tagged.csv")).records);
    CelfModel m;
    m.pathloss = fit_log_distance(links);
    m.hyper = {0.5, 0.5, 1.0, 0.5, 1.0};
    m.grid = grid_from_links(links, 0.5);
    m.prior = {1.0, 1.0, m.grid};
    m.field = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.grid.size()));
    save_model(path("m.txt"), m);
    std::ostringstream ev;
    cli::cmd_evaluate(path("m.txt"), path("tagged.csv"), {}, "", false, ev);
    EXPECT_NE(ev.str().find("noise_floor stationary="), std::string::npos) << ev.str();
}

TEST_F(CliTest, ExportFieldRoundTrip)
{
    std::ostringstream out;
    cli::cmd_synth("", small_scenario(), std::nullopt, path("site"), out);
    cli::CommonOptions common;
    common.config_path = small_config();
    cli::cmd_train(path("site.csv"), common, {path("model.txt"), "", ""}, out);
    cli::cmd_export_field(path("model.txt"), path("field"), out);
    const CelfModel m = load_model(path("model.txt"));
    std::ifstream csv(path("field.csv"));
    EXPECT_TRUE(read_field_csv(csv) == m.field);
    const std::string side = slurp(path("field.pgm.txt"));
    EXPECT_NE(side.find("min_db=" + text::format_double(m.field.minCoeff()) + "\n"), std::string::npos);
    EXPECT_NE(side.find("max_db=" + text::format_double(m.field.maxCoeff()) + "\n"), std::string::npos);
    const std::string pgm = slurp(path("field.pgm"));
    EXPECT_EQ(pgm.substr(0, 2), "P5");
}

TEST_F(CliTest, TuneSinglePointPassesThrough)
{
    std::ostringstream out;
    cli::cmd_synth("", small_scenario(), std::nullopt, path("site"), out);
    cli::CommonOptions common;
    common.config_path = small_config();
    write("grid.txt", "alpha=1\nfolds=3\n");
    std::ostringstream tune;
    cli::cmd_tune(path("site.csv"), path("grid.txt"), common, path("cv.csv"), path("best.txt"), 1, tune);
    EXPECT_NE(tune.str().find("combinations=1 folds=3"), std::string::npos);
    EXPECT_NE(tune.str().find("alpha=1\n"), std::string::npos);
    const CelfModel best = load_model(path("best.txt"));
    EXPECT_EQ(best.hyper, (Hyperparameters{0.5, 0.5, 2.0, 0.4, 1.0}));
}

TEST_F(CliTest, FlagsOverrideConfig)
{
    cli::CommonOptions o;
    o.config_path = write("c.txt", "seed=5\nsolver=map\nsplit_ratio=0.5\n");
    o.seed = 9;
    o.solver = "mne";
    o.ratio = 0.8;
    const Config c = cli::resolve_config(o);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.solver, SolverChoice::mne);
    EXPECT_EQ(c.split_ratio, 0.8);
    o.ratio = 1.0;
    EXPECT_THROW(cli::resolve_config(o), Error);
    o.ratio.reset();
    o.solver = "lu";
    EXPECT_THROW(cli::resolve_config(o), Error);
}
