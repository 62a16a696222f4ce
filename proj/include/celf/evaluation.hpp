#ifndef CELF_EVALUATION_HPP
#define CELF_EVALUATION_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "celf/dataset.hpp"
#include "celf/error.hpp"
#include "celf/estimator.hpp"
#include "celf/geometry.hpp"
#include "celf/pathloss.hpp"
#include "celf/text.hpp"
#include "celf/timing.hpp"

namespace celf {

/// Variance-reduction report for one predictor on one link set.
///
/// Both variances are mean squares about zero: fading_variance = ||z||^2 / N
/// and error_variance = ||z - z_hat||^2 / N, so a zero predictor scores
/// exactly 0%.
struct EvalReport
{
    std::size_t n = 0;
    double fading_variance = 0.0;
    double error_variance = 0.0;
    double variance_reduction = 0.0; ///< percent
    std::vector<double> residuals;
    std::size_t out_of_coverage = 0;
};

inline double mean_square(std::span<const double> v)
{
    if (v.empty())
        return 0.0;
    double s = 0.0;
    for (double x : v)
        s += x * x;
    return s / static_cast<double>(v.size());
}

inline double variance_reduction_percent(double fading_variance, double error_variance)
{
    return (fading_variance - error_variance) / fading_variance * 100.0;
}

/// Builds a report from fading losses and predicted shadowing.
inline EvalReport make_report(std::span<const double> z, std::span<const double> predicted)
{
    if (z.empty())
        throw Error("evaluate", "evaluation set is empty");
    if (z.size() != predicted.size())
        throw Error("evaluate", "prediction count does not match the evaluation set");
    EvalReport r;
    r.n = z.size();
    r.residuals.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        r.residuals[i] = z[i] - predicted[i];
    r.fading_variance = mean_square(z);
    r.error_variance = mean_square(r.residuals);
    r.variance_reduction = variance_reduction_percent(r.fading_variance, r.error_variance);
    return r;
}

inline EvalReport evaluate(const CelfModel& model, std::span<const Link> test_links)
{
    if (test_links.empty())
        throw Error("evaluate", "test set is empty");
    const std::vector<double> z = fading_losses(model.pathloss, test_links);
    const ShadowingPrediction pred = predict_shadowing(model, test_links);
    EvalReport r = make_report(z, std::span<const double>(pred.shadowing.data(), z.size()));
    r.out_of_coverage = static_cast<std::size_t>(std::count(pred.out_of_coverage.begin(), pred.out_of_coverage.end(), true));
    return r;
}

/// Variance of (measured - predicted) after removing the mean bias.
inline double debiased_error_variance(std::span<const double> measured, std::span<const double> predicted)
{
    if (measured.empty() || measured.size() != predicted.size())
        throw Error("evaluate", "debiased variance needs equally sized, non-empty inputs");
    std::vector<double> r(measured.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = measured[i] - predicted[i];
    const double bias = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    for (double& x : r)
        x -= bias;
    return mean_square(r);
}

/// Okumura-Hata baseline scored against the log-distance fading variance of
/// the same links. Hata predicts path loss only, so the transmit power and any
/// calibration offset are absorbed by removing the mean residual.
inline EvalReport evaluate_baseline_hata(const HataParams& params, const LogDistanceModel& pathloss,
                                         std::span<const Link> test_links)
{
    validate(params);
    if (test_links.empty())
        throw Error("evaluate", "test set is empty");
    std::vector<double> measured, predicted;
    measured.reserve(test_links.size());
    predicted.reserve(test_links.size());
    std::size_t outside = 0;
    for (const Link& link : test_links) {
        const double km = link.length() / 1000.0;
        measured.push_back(link.rss());
        predicted.push_back(-hata_path_loss(params, km));
        outside += hata_distance_in_range(km) ? 0 : 1;
    }
    const std::vector<double> z = fading_losses(pathloss, test_links);

    EvalReport r;
    r.n = test_links.size();
    r.fading_variance = mean_square(z);
    r.error_variance = debiased_error_variance(measured, predicted);
    r.variance_reduction = variance_reduction_percent(r.fading_variance, r.error_variance);
    r.residuals.resize(r.n);
    double bias = 0.0;
    for (std::size_t i = 0; i < r.n; ++i)
        bias += measured[i] - predicted[i];
    bias /= static_cast<double>(r.n);
    for (std::size_t i = 0; i < r.n; ++i)
        r.residuals[i] = measured[i] - predicted[i] - bias;
    r.out_of_coverage = outside; // links outside Hata's nominal 1-20 km range
    return r;
}

// ---------------------------------------------------------------------------
// Train/test split

template <class T>
struct Split
{
    std::vector<T> train;
    std::vector<T> test;
    std::vector<std::size_t> train_index;
    std::vector<std::size_t> test_index;
};

/// Independent Bernoulli(ratio) assignment of each item to the training set.
template <class T>
Split<T> split_train_test(std::span<const T> items, double ratio, std::uint64_t seed)
{
    if (items.empty())
        throw Error("split", "cannot split an empty dataset");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw Error("split", "train ratio must lie strictly between 0 and 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Split<T> s;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (unit(rng) < ratio) {
            s.train.push_back(items[i]);
            s.train_index.push_back(i);
        } else {
            s.test.push_back(items[i]);
            s.test_index.push_back(i);
        }
    }
    return s;
}

template <class T>
Split<T> split_train_test(const std::vector<T>& items, double ratio, std::uint64_t seed)
{
    return split_train_test(std::span<const T>(items), ratio, seed);
}

// ---------------------------------------------------------------------------
// k-fold cross-validated grid search

struct GridSearchSpec
{
    std::vector<double> pixel_width;
    std::vector<double> shadow_ratio;
    std::vector<double> space_constant;
    std::vector<double> excess_length;
    std::vector<double> alpha;
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    std::size_t max_combinations = 10000;

    std::size_t combinations() const
    {
        return pixel_width.size() * shadow_ratio.size() * space_constant.size() * excess_length.size() * alpha.size();
    }

    /// Cartesian product, pixel width varying slowest and alpha fastest.
    std::vector<Hyperparameters> expand() const
    {
        std::vector<Hyperparameters> out;
        out.reserve(combinations());
        for (double pw : pixel_width)
            for (double sr : shadow_ratio)
                for (double sc : space_constant)
                    for (double el : excess_length)
                        for (double a : alpha)
                            out.push_back({pw, sr, sc, el, a});
        return out;
    }
};

inline GridSearchSpec single_point_grid(const Hyperparameters& h, std::size_t folds = 5, std::uint64_t seed = 1)
{
    GridSearchSpec g;
    g.pixel_width = {h.pixel_width};
    g.shadow_ratio = {h.shadow_ratio};
    g.space_constant = {h.space_constant};
    g.excess_length = {h.excess_length};
    g.alpha = {h.alpha};
    g.folds = folds;
    g.seed = seed;
    return g;
}

/// Grid spec from key=value pairs; list values are comma-separated.
/// Keys: pixel_width, shadow_ratio, space_constant, excess_length, alpha,
/// folds, seed, max_combinations.
inline GridSearchSpec parse_grid_spec(const text::KeyValues& kv)
{
    GridSearchSpec g;
    const auto list = [](const std::string& key, const std::string& value) {
        std::vector<double> out;
        for (auto cell : text::split(value, ',')) {
            const auto v = text::parse_double(cell);
            if (!v)
                throw Error("tune", "grid key '" + key + "' has a non-numeric entry '" + std::string(cell) + "'");
            out.push_back(*v);
        }
        return out;
    };
    for (const auto& [key, value] : kv) {
        if (key == "pixel_width") g.pixel_width = list(key, value);
        else if (key == "shadow_ratio") g.shadow_ratio = list(key, value);
        else if (key == "space_constant") g.space_constant = list(key, value);
        else if (key == "excess_length") g.excess_length = list(key, value);
        else if (key == "alpha") g.alpha = list(key, value);
        else if (key == "folds" || key == "seed" || key == "max_combinations") {
            const auto v = text::parse_integer<std::uint64_t>(value);
            if (!v)
                throw Error("tune", "grid key '" + key + "' must be a non-negative integer");
            if (key == "folds") g.folds = *v;
            else if (key == "seed") g.seed = *v;
            else g.max_combinations = *v;
        } else
            throw Error("tune", "unknown grid key '" + key + "'");
    }
    return g;
}

/// Seeded fold assignment: items are permuted, then dealt round-robin.
struct FoldPlan
{
    std::size_t folds = 0;
    std::vector<std::size_t> fold_of; ///< fold index per item

    std::vector<std::size_t> held_out(std::size_t f) const
    {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == f)
                idx.push_back(i);
        return idx;
    }

    std::vector<std::size_t> training(std::size_t f) const
    {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != f)
                idx.push_back(i);
        return idx;
    }
};

inline FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed)
{
    if (k < 2)
        throw Error("tune", "cross-validation needs at least 2 folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
    }
    FoldPlan plan;
    plan.folds = k;
    plan.fold_of.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos)
        plan.fold_of[order[pos]] = pos % k;
    return plan;
}

struct CvRow
{
    std::size_t combination = 0;
    std::size_t fold = 0;
    Hyperparameters hyper;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double fading_variance = 0.0;
    double error_variance = 0.0;
    double variance_reduction = 0.0;
};

struct CvAggregate
{
    std::size_t combination = 0;
    Hyperparameters hyper;
    double mean_reduction = 0.0;
    double std_reduction = 0.0;
    double mean_error_variance = 0.0;
};

struct CvResult
{
    Hyperparameters best;
    std::size_t best_combination = 0;
    std::vector<CvRow> rows;             ///< combination-major, fold-minor
    std::vector<CvAggregate> aggregates; ///< one per combination
    FoldPlan plan;
};

struct CvOptions
{
    double margin = 0.0;
    double ref_distance = 1.0;
    SolverChoice solver = SolverChoice::automatic;
    std::size_t memory_budget_bytes = kDefaultMemoryBudgetBytes;
    unsigned threads = 0; ///< 0 = hardware concurrency
};

/// Grid search over `spec` by k-fold cross-validation on `links`.
///
/// For every (combination, fold) the path-loss model is refit on the training
/// folds only; the pixel grid depends only on endpoint geometry and is shared
/// across folds. Selection maximizes the mean held-out variance reduction; ties
/// go to larger alpha, then larger pixel width.
inline CvResult cross_validate(std::span<const Link> links, const GridSearchSpec& spec, const CvOptions& options = {})
{
    const std::size_t n_combos = spec.combinations();
    if (n_combos == 0)
        throw Error("tune", "every hyperparameter needs at least one candidate value");
    if (n_combos > spec.max_combinations)
        throw Error("tune", "grid has " + std::to_string(n_combos) + " combinations, over the budget of " +
                                std::to_string(spec.max_combinations));
    if (spec.folds < 2)
        throw Error("tune", "cross-validation needs at least 2 folds");
    if (links.size() / spec.folds < 10)
        throw Error("tune", "cross-validation needs at least 10 links per fold (" + std::to_string(links.size()) +
                                " links, " + std::to_string(spec.folds) + " folds)");

    CvResult result;
    result.plan = make_folds(links.size(), spec.folds, spec.seed);
    const std::vector<Hyperparameters> combos = spec.expand();
    for (const auto& h : combos)
        validate(h);

    struct FoldData
    {
        std::vector<Link> train, test;
        LogDistanceModel pathloss;
    };
    std::vector<FoldData> folds(spec.folds);
    for (std::size_t f = 0; f < spec.folds; ++f) {
        const auto tr = result.plan.training(f);
        const auto te = result.plan.held_out(f);
        std::vector<bool> seen(links.size(), false);
        for (std::size_t i : tr)
            seen[i] = true;
        for (std::size_t i : te)
            if (seen[i])
                throw std::logic_error("cross-validation fold leaks a held-out link into training");
        if (tr.size() + te.size() != links.size())
            throw std::logic_error("cross-validation folds do not partition the data");
        for (std::size_t i : tr)
            folds[f].train.push_back(links[i]);
        for (std::size_t i : te)
            folds[f].test.push_back(links[i]);
        folds[f].pathloss = fit_log_distance(folds[f].train, options.ref_distance);
    }

    std::map<double, PixelGrid> grids;
    for (double pw : spec.pixel_width)
        grids.emplace(pw, grid_from_links(links, pw, options.margin));

    const std::size_t n_tasks = n_combos * spec.folds;
    result.rows.resize(n_tasks);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n_tasks);
    const auto worker = [&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) {
            const std::size_t c = t / spec.folds, f = t % spec.folds;
            try {
                TrainOptions topt{options.solver, options.memory_budget_bytes};
                const TrainResult tr = train(folds[f].train, combos[c], folds[f].pathloss,
                                             grids.at(combos[c].pixel_width), topt);
                const EvalReport ev = evaluate(tr.model, folds[f].test);
                result.rows[t] = {c, f, combos[c], folds[f].train.size(), folds[f].test.size(),
                                  ev.fading_variance, ev.error_variance, ev.variance_reduction};
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    unsigned n_threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_tasks));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_threads; ++i)
            pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    for (std::size_t c = 0; c < n_combos; ++c) {
        CvAggregate agg;
        agg.combination = c;
        agg.hyper = combos[c];
        double sum = 0.0, sum_sq = 0.0, err = 0.0;
        for (std::size_t f = 0; f < spec.folds; ++f) {
            const CvRow& row = result.rows[c * spec.folds + f];
            sum += row.variance_reduction;
            sum_sq += row.variance_reduction * row.variance_reduction;
            err += row.error_variance;
        }
        const double k = static_cast<double>(spec.folds);
        agg.mean_reduction = sum / k;
        agg.std_reduction = std::sqrt(std::max(0.0, sum_sq / k - agg.mean_reduction * agg.mean_reduction));
        agg.mean_error_variance = err / k;
        result.aggregates.push_back(agg);
    }

    const auto better = [](const CvAggregate& a, const CvAggregate& b) {
        if (a.mean_reduction != b.mean_reduction)
            return a.mean_reduction > b.mean_reduction;
        if (a.hyper.alpha != b.hyper.alpha)
            return a.hyper.alpha > b.hyper.alpha;
        return a.hyper.pixel_width > b.hyper.pixel_width;
    };
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_combos; ++c)
        if (better(result.aggregates[c], result.aggregates[best]))
            best = c;
    result.best_combination = best;
    result.best = combos[best];
    return result;
}

// ---------------------------------------------------------------------------
// Noise-floor bound from repeated measurements

struct VarianceBound
{
    double stationary = 0.0;     ///< measurement-noise variance (dB^2)
    double sub_wavelength = 0.0; ///< small-scale fading variance (dB^2)
    double sum = 0.0;
    double implied_max_reduction = 0.0; ///< percent, against reference_variance
    double reference_variance = 0.0;
    std::size_t stationary_count = 0;
    std::size_t sub_wavelength_count = 0;
};

namespace detail {

/// Pooled within-link variance of fading losses: deviations are taken from
/// each link_id's own mean, divided by (N - number of links).
inline double pooled_variance(const std::vector<std::pair<std::string, double>>& samples)
{
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& [id, z] : samples) {
        sums[id].first += z;
        ++sums[id].second;
    }
    double ss = 0.0;
    for (const auto& [id, z] : samples) {
        const auto& [s, n] = sums.at(id);
        const double d = z - s / static_cast<double>(n);
        ss += d * d;
    }
    const std::size_t dof = samples.size() - sums.size();
    return dof > 0 ? ss / static_cast<double>(dof) : 0.0;
}

} // namespace detail

/// Lower-bound estimate of the unpredictable fading variance from records
/// tagged stationary and sub_wavelength. Fading losses are taken about the
/// log-distance prediction, then pooled per link_id.
inline VarianceBound grouped_variance_bound(std::span<const MeasurementRecord> records,
                                            const LogDistanceModel& pathloss, double reference_variance)
{
    std::vector<std::pair<std::string, double>> stationary, rotating;
    for (const auto& r : records) {
        if (!r.group)
            continue;
        const double z = fading_loss(pathloss, r.link);
        if (*r.group == GroupTag::stationary)
            stationary.emplace_back(r.link.id(), z);
        else if (*r.group == GroupTag::sub_wavelength)
            rotating.emplace_back(r.link.id(), z);
    }
    if (stationary.size() < 2 || rotating.size() < 2)
        throw Error("evaluate", "grouped variance bound unavailable: dataset needs at least two records tagged "
                                "'stationary' and two tagged 'sub_wavelength'");
    if (!(reference_variance > 0.0))
        throw Error("evaluate", "reference fading variance must be positive");

    VarianceBound b;
    b.stationary = detail::pooled_variance(stationary);
    b.sub_wavelength = detail::pooled_variance(rotating);
    b.sum = b.stationary + b.sub_wavelength;
    b.reference_variance = reference_variance;
    b.implied_max_reduction = variance_reduction_percent(reference_variance, b.sum);
    b.stationary_count = stationary.size();
    b.sub_wavelength_count = rotating.size();
    return b;
}

// ---------------------------------------------------------------------------
// Report writers

inline void write_timing_csv(std::ostream& out, const PhaseTimings& t)
{
    out << "phase,seconds\n";
    for (const auto& [name, s] : t.phases)
        out << name << ',' << text::format_double(s) << '\n';
}

inline void write_eval_csv(std::ostream& out, const std::vector<std::pair<std::string, EvalReport>>& reports)
{
    using text::format_double;
    out << "method,n,fading_variance_db2,error_variance_db2,variance_reduction_pct,flagged\n";
    for (const auto& [name, r] : reports)
        out << name << ',' << r.n << ',' << format_double(r.fading_variance) << ',' << format_double(r.error_variance)
            << ',' << format_double(r.variance_reduction) << ',' << r.out_of_coverage << '\n';
}

inline void write_eval_text(std::ostream& out, const std::vector<std::pair<std::string, EvalReport>>& reports)
{
    char buf[256];
    for (const auto& [name, r] : reports) {
        std::snprintf(buf, sizeof buf,
                      "%-12s links=%zu  fading variance=%.3f dB^2  error variance=%.3f dB^2  reduction=%.2f%%  "
                      "flagged=%zu\n",
                      name.c_str(), r.n, r.fading_variance, r.error_variance, r.variance_reduction, r.out_of_coverage);
        out << buf;
    }
}

inline void write_residuals_csv(std::ostream& out, const EvalReport& r)
{
    out << "index,residual_db\n";
    for (std::size_t i = 0; i < r.residuals.size(); ++i)
        out << i << ',' << text::format_double(r.residuals[i]) << '\n';
}

inline void write_cv_csv(std::ostream& out, const CvResult& cv)
{
    using text::format_double;
    out << "combination,fold,pixel_width,shadow_ratio,space_constant,excess_length,alpha,n_train,n_test,"
           "fading_variance,error_variance,variance_reduction\n";
    const auto hyper = [&out](const Hyperparameters& h) {
        out << format_double(h.pixel_width) << ',' << format_double(h.shadow_ratio) << ','
            << format_double(h.space_constant) << ',' << format_double(h.excess_length) << ','
            << format_double(h.alpha) << ',';
    };
    for (const CvRow& r : cv.rows) {
        out << r.combination << ',' << r.fold << ',';
        hyper(r.hyper);
        out << r.n_train << ',' << r.n_test << ',' << format_double(r.fading_variance) << ','
            << format_double(r.error_variance) << ',' << format_double(r.variance_reduction) << '\n';
    }
    for (const CvAggregate& a : cv.aggregates) {
        out << a.combination << ",mean,";
        hyper(a.hyper);
        out << ",," << ',' << format_double(a.mean_error_variance) << ',' << format_double(a.mean_reduction) << '\n';
    }
}

} // namespace celf

#endif // CELF_EVALUATION_HPP
