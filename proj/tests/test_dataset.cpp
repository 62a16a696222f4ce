#include <cmath>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "celf/dataset.hpp"
#include "support.hpp"

using namespace celf;

namespace {

LoadResult parse(const std::string& text, LoadOptions opts = {})
{
    std::istringstream in(text);
    return read_csv(in, "mem.csv", opts);
}

} // namespace

TEST(Dataset, WellFormedRows)
{
    const auto r = parse("tx_x,tx_y,rx_x,rx_y,rss_dbm\n0,0,1,0,-40\n0,0,2,0,-46.5\n\n1,1,4,5,-50\n");
    ASSERT_EQ(r.records.size(), 3u);
    EXPECT_TRUE(r.rejected.empty());
    EXPECT_FALSE(r.has_link_ids);
    EXPECT_DOUBLE_EQ(r.records[2].link.length(), 5.0);
    EXPECT_DOUBLE_EQ(r.records[1].link.rss(), -46.5);
}

TEST(Dataset, CoincidentEndpointsRejectedWithLine)
{
    const auto r = parse("tx_x,tx_y,rx_x,rx_y,rss_dbm\n0,0,1,0,-40\n3,3,3,3,-40\n0,0,2,0,-46\n");
    EXPECT_EQ(r.records.size(), 2u);
    ASSERT_EQ(r.rejected.size(), 1u);
    EXPECT_EQ(r.rejected[0].line, 3u);
}

TEST(Dataset, GroupTagsPreserved)
{
    const auto r = parse("tx_x,tx_y,rx_x,rx_y,rss_dbm,link_id,group_tag\n"
                         "0,0,1,0,-40,a,stationary\n0,0,1,0,-41,a,sub_wavelength\n0,0,2,0,-45,b,other\n"
                         "0,0,2,0,-45,b,\n0,0,2,0,-45,b,walking\n");
    EXPECT_TRUE(r.has_group_tags);
    EXPECT_TRUE(r.has_link_ids);
    ASSERT_EQ(r.records.size(), 4u);
    EXPECT_EQ(r.records[0].group, GroupTag::stationary);
    EXPECT_EQ(r.records[1].group, GroupTag::sub_wavelength);
    EXPECT_EQ(r.records[2].group, GroupTag::other);
    EXPECT_FALSE(r.records[3].group.has_value());
    EXPECT_EQ(r.records[0].link.id(), "a");
    ASSERT_EQ(r.rejected.size(), 1u);
    EXPECT_EQ(r.rejected[0].line, 6u);
}

TEST(Dataset, SchemaErrors)
{
    EXPECT_THROW(parse(""), Error);
    EXPECT_THROW(parse("\n\n"), Error);
    EXPECT_THROW(parse("tx_x,tx_y,rx_x,rss_dbm\n"), Error);
    EXPECT_THROW(parse("tx_x,tx_y,rx_x,rx_y,rss_dbm,extra\n"), Error);
    EXPECT_THROW(parse("tx_x,tx_y,rx_x,rx_y,rss_dbm\n0,0,1,0,abc\n"), Error);
    EXPECT_THROW(parse("tx_x,tx_y,rx_x,rx_y,rss_dbm\n0,0,1,0\n"), Error);
    EXPECT_THROW(load_csv("/nonexistent/file.csv"), Error);
    try {
        parse("tx_x,tx_y,rx_x,rx_y,rss_dbm\n0,0,1,0,-40\n0,x,1,0,-40\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.stage(), "load");
        EXPECT_NE(std::string(e.what()).find("mem.csv:3"), std::string::npos);
    }
}

TEST(Dataset, RssOptionalForPrediction)
{
    EXPECT_THROW(parse("tx_x,tx_y,rx_x,rx_y\n0,0,1,0\n"), Error);
    const auto r = parse("tx_x,tx_y,rx_x,rx_y,link_id\n0,0,1,0,q\n", LoadOptions{false});
    EXPECT_FALSE(r.has_rss);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].link.id(), "q");
}

TEST(Dataset, WriteThenReadIsLossless)
{
    SyntheticScenario s;
    s.node_count = 12;
    s.noise_var = 2.0;
    s.stationary_samples = 3;
    s.sub_wavelength_samples = 3;
    const auto data = generate_synthetic(s);
    std::stringstream buf;
    write_csv(buf, data.records);
    const auto back = read_csv(buf, "buf");
    ASSERT_EQ(back.records.size(), data.records.size());
    for (std::size_t i = 0; i < back.records.size(); ++i) {
        const auto& a = data.records[i];
        const auto& b = back.records[i];
        EXPECT_EQ(a.link.tx(), b.link.tx());
        EXPECT_EQ(a.link.rx(), b.link.rx());
        EXPECT_EQ(a.link.rss(), b.link.rss());
        EXPECT_EQ(a.link.id(), b.link.id());
        EXPECT_EQ(a.group, b.group);
    }
    std::stringstream again;
    write_csv(again, back.records);
    EXPECT_EQ(again.str(), buf.str());
}

TEST(Synthetic, AllPairsCount)
{
    SyntheticScenario s;
    s.node_count = 44;
    EXPECT_EQ(generate_synthetic(s).records.size(), 946u);
    EXPECT_EQ(generate_synthetic(scenario_preset("indoor-like")).records.size(), 946u);
}

TEST(Synthetic, BipartiteAndRandomPairs)
{
    SyntheticScenario s;
    s.node_count = 20;
    s.link_policy = LinkPolicy::bipartite;
    s.n_receivers = 4;
    EXPECT_EQ(generate_synthetic(s).records.size(), 64u);
    s.link_policy = LinkPolicy::random_pairs;
    s.link_count = 50;
    const auto data = generate_synthetic(s);
    ASSERT_EQ(data.records.size(), 50u);
    std::set<std::string> ids;
    for (const auto& r : data.records)
        ids.insert(r.link.id());
    EXPECT_EQ(ids.size(), 50u);
}

TEST(Synthetic, BitReproducible)
{
    SyntheticScenario s;
    s.noise_var = 3.0;
    s.seed = 77;
    const auto a = generate_synthetic(s);
    const auto b = generate_synthetic(s);
    std::stringstream sa, sb;
    write_csv(sa, a.records);
    write_csv(sb, b.records);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_TRUE(a.true_field == b.true_field);
    s.seed = 78;
    std::stringstream sc;
    write_csv(sc, generate_synthetic(s).records);
    EXPECT_NE(sa.str(), sc.str());
}

TEST(Synthetic, NegligibleFieldLiesOnCurve)
{
    SyntheticScenario s;
    s.sigma_x_sq = 1e-200; // field contributes ~1e-100 dB
    s.noise_var = 0.0;
    const auto data = generate_synthetic(s);
    const auto pl = s.pathloss();
    for (const auto& r : data.records)
        EXPECT_NEAR(r.link.rss(), predict_mean_power(pl, r.link), 1e-12);
}

TEST(Synthetic, NoiselessFadingEqualsForwardModel)
{
    SyntheticScenario s;
    s.node_count = 25;
    s.placement = NodePlacement::lattice;
    s.noise_var = 0.0;
    const auto data = generate_synthetic(s);
    const auto links = links_of(data.records);
    const auto z = fading_losses(s.pathloss(), links);
    const Eigen::VectorXd wp = test::dense_weights(links, data.grid, s.excess_length) * data.true_field;
    for (std::size_t l = 0; l < links.size(); ++l) {
        EXPECT_NEAR(z[l], wp[static_cast<Eigen::Index>(l)], 1e-10);
        EXPECT_NEAR(z[l], data.true_shadowing[l], 1e-10);
    }
}

TEST(Synthetic, CalibratedVariances)
{
    SyntheticScenario s;
    s.node_count = 40;
    s.fading_variance = 10.0;
    s.shadow_ratio = 0.4;
    const auto data = generate_synthetic(s);
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(data.true_shadowing.data(),
                                                                static_cast<Eigen::Index>(data.true_shadowing.size()));
    EXPECT_NEAR((x.array() - x.mean()).square().mean(), 4.0, 1e-9);
    EXPECT_DOUBLE_EQ(data.noise_var, 6.0);
}

TEST(Synthetic, LatticePlacementInsideBox)
{
    SyntheticScenario s;
    s.placement = NodePlacement::lattice;
    s.node_count = 30;
    const auto data = generate_synthetic(s);
    for (const auto& r : data.records)
        for (Point2D p : {r.link.tx(), r.link.rx()}) {
            EXPECT_GE(p.x, 0.0);
            EXPECT_LE(p.x, s.width);
            EXPECT_GE(p.y, 0.0);
            EXPECT_LE(p.y, s.height);
        }
}

TEST(Synthetic, Presets)
{
    const auto indoor = scenario_preset("indoor-like");
    EXPECT_EQ(indoor.hyper, (Hyperparameters{0.35, 0.30, 2.5, 0.18, 41.0}));
    EXPECT_EQ(indoor.grid().n_cols(), 50u);
    EXPECT_EQ(indoor.grid().n_rows(), 43u);
    const auto outdoor = scenario_preset("outdoor-like");
    EXPECT_EQ(outdoor.hyper, (Hyperparameters{25.0, 0.58, 35.0, 105.0, 0.3}));
    try {
        scenario_preset("moon");
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("indoor-like, outdoor-like"), std::string::npos);
    }
}

TEST(Synthetic, ScenarioFile)
{
    text::KeyValues kv{{"preset", "indoor-like"}, {"node_count", "10"}, {"seed", "5"}, {"placement", "lattice"}};
    const auto s = parse_scenario(kv);
    EXPECT_EQ(s.node_count, 10u);
    EXPECT_EQ(s.seed, 5u);
    EXPECT_EQ(s.placement, NodePlacement::lattice);
    EXPECT_DOUBLE_EQ(s.pixel_width, 0.35);
    EXPECT_THROW(parse_scenario({{"colour", "red"}}), Error);
    EXPECT_THROW(parse_scenario({{"width", "wide"}}), Error);
}

TEST(Synthetic, Validation)
{
    SyntheticScenario s;
    s.node_count = 1;
    EXPECT_THROW(generate_synthetic(s), Error);
    s.node_count = 10;
    s.link_policy = LinkPolicy::bipartite;
    s.n_receivers = 10;
    EXPECT_THROW(generate_synthetic(s), Error);
    s.link_policy = LinkPolicy::random_pairs;
    s.link_count = 1000;
    EXPECT_THROW(generate_synthetic(s), Error);
}
