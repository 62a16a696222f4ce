// Generates a small synthetic site, trains on 70% of the links and reports
// the held-out variance reduction.

#include <cstdio>

#include "celf/celf.hpp"

int main()
{
    celf::SyntheticScenario s;
    s.width = 8.0;
    s.height = 8.0;
    s.pixel_width = 0.4;
    s.space_constant = 2.0;
    s.excess_length = 0.3;
    s.fading_variance = 16.0;
    s.shadow_ratio = 0.6;
    s.node_count = 24;
    s.seed = 7;

    const celf::SyntheticData data = celf::generate_synthetic(s);
    const auto split = celf::split_train_test(data.records, 0.7, 1);
    const auto train_links = celf::links_of(split.train);
    const auto test_links = celf::links_of(split.test);

    const celf::Hyperparameters hyper{0.4, 0.6, 2.0, 0.3, 50.0};
    const celf::LogDistanceModel pl = celf::fit_log_distance(train_links);
    const celf::TrainResult tr = celf::train(train_links, hyper, pl, data.grid);

    const celf::EvalReport r = celf::evaluate(tr.model, test_links);
    std::printf("links %zu train / %zu test, %zu pixels, solver %s\n", train_links.size(), test_links.size(),
                data.grid.size(), std::string(celf::to_string(tr.model.solver_path)).c_str());
    std::printf("path loss exponent %.3f (true %.3f)\n", pl.exponent, s.exponent);
    std::printf("held-out variance reduction %.1f%%\n", r.variance_reduction);
}
