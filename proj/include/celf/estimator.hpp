#ifndef CELF_ESTIMATOR_HPP
#define CELF_ESTIMATOR_HPP

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "celf/error.hpp"
#include "celf/geometry.hpp"
#include "celf/pathloss.hpp"
#include "celf/prior.hpp"
#include "celf/timing.hpp"

namespace celf {

/// Model hyperparameters: pixel width (m), shadowing variance ratio
/// sigma_x^2 / sigma_z^2, space constant (m), ellipse excess length (m) and
/// the regularizer alpha.
struct Hyperparameters
{
    double pixel_width = 1.0;
    double shadow_ratio = 0.5;
    double space_constant = 1.0;
    double excess_length = 1.0;
    double alpha = 1.0;

    friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

inline void validate(const Hyperparameters& h)
{
    const auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(h.pixel_width))
        throw Error("config", "pixel_width must be positive");
    if (!positive(h.shadow_ratio) || h.shadow_ratio > 1.0)
        throw Error("config", "shadow_ratio must lie in (0, 1]");
    if (!positive(h.space_constant))
        throw Error("config", "space_constant must be positive");
    if (!positive(h.excess_length))
        throw Error("config", "excess_length must be positive");
    if (!positive(h.alpha))
        throw Error("config", "alpha must be positive");
}

enum class SolverPath
{
    map_cholesky,
    minimum_norm,
};

inline std::string_view to_string(SolverPath p) noexcept
{
    return p == SolverPath::map_cholesky ? "map_cholesky" : "minimum_norm";
}

inline std::optional<SolverPath> parse_solver_path(std::string_view s) noexcept
{
    if (s == "map_cholesky")
        return SolverPath::map_cholesky;
    if (s == "minimum_norm")
        return SolverPath::minimum_norm;
    return std::nullopt;
}

enum class SolverChoice
{
    automatic, ///< minimum norm when L < M, otherwise MAP/Cholesky
    map,
    mne,
};

inline std::optional<SolverChoice> parse_solver_choice(std::string_view s) noexcept
{
    if (s == "auto")
        return SolverChoice::automatic;
    if (s == "map")
        return SolverChoice::map;
    if (s == "mne")
        return SolverChoice::mne;
    return std::nullopt;
}

inline std::string_view to_string(SolverChoice c) noexcept
{
    switch (c) {
    case SolverChoice::map: return "map";
    case SolverChoice::mne: return "mne";
    default: return "auto";
    }
}

inline SolverPath select_solver_path(SolverChoice choice, std::size_t n_links, std::size_t n_pixels) noexcept
{
    switch (choice) {
    case SolverChoice::map: return SolverPath::map_cholesky;
    case SolverChoice::mne: return SolverPath::minimum_norm;
    default: return n_links < n_pixels ? SolverPath::minimum_norm : SolverPath::map_cholesky;
    }
}

struct SolveReport
{
    SolverPath path = SolverPath::map_cholesky;
    double factorization_seconds = 0.0;
    /// ||A p - b|| of the system actually factorized: the M x M normal
    /// equations on the MAP path, the L x L Gram system on the minimum-norm path.
    double residual_norm = 0.0;
    double relative_residual = 0.0;
    bool jitter_applied = false;
    PhaseTimings timings;
};

struct FieldSolution
{
    Eigen::VectorXd field;
    SolveReport report;
};

namespace detail {

/// Cholesky with one jittered retry, mirroring the prior factorization.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(const Eigen::MatrixXd& a, bool& jittered, std::string_view what)
{
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    jittered = false;
    if (llt.info() == Eigen::Success)
        return llt;
    const double scale = a.rows() > 0 ? a.diagonal().cwiseAbs().mean() : 1.0;
    Eigen::MatrixXd bumped = a;
    bumped.diagonal().array() += kCholeskyJitter * scale;
    llt.compute(bumped);
    jittered = true;
    if (llt.info() != Eigen::Success)
        throw Error("train", std::string("Cholesky factorization of the ") + std::string(what) +
                                 " failed after diagonal jitter");
    return llt;
}

inline void check_shapes(const SparseRowMatrix& w, const Eigen::VectorXd& z, const CovarianceMatrix& cov)
{
    if (w.rows() != z.size())
        throw Error("train", "weight matrix rows do not match the fading-loss vector");
    if (w.cols() != cov.size())
        throw Error("train", "weight matrix columns do not match the covariance size");
}

} // namespace detail

/// MAP estimate p = (W^T W + alpha C_p^{-1})^{-1} W^T z, obtained by Cholesky
/// factorization of the M x M system and forward/back substitution.
inline FieldSolution solve_map_cholesky(const SparseRowMatrix& w, const Eigen::VectorXd& z,
                                        const CovarianceMatrix& cov, double alpha)
{
    if (!(alpha > 0.0))
        throw Error("train", "alpha must be positive");
    detail::check_shapes(w, z, cov);

    FieldSolution out;
    out.report.path = SolverPath::map_cholesky;
    Stopwatch clock;

    Eigen::MatrixXd a = cov.precision();
    a *= alpha;
    const Eigen::SparseMatrix<double> wtw = (w.transpose() * w).pruned();
    for (Eigen::Index k = 0; k < wtw.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(wtw, k); it; ++it)
            a(it.row(), it.col()) += it.value();
    const Eigen::VectorXd b = w.transpose() * z;
    out.report.timings.add("assemble", clock.lap());

    const auto llt = detail::robust_llt(a, out.report.jitter_applied, "normal equations");
    out.report.factorization_seconds = clock.lap();
    out.report.timings.add("factorize", out.report.factorization_seconds);

    out.field = llt.solve(b);
    out.report.timings.add("solve", clock.lap());

    out.report.residual_norm = (a * out.field - b).norm();
    const double bn = b.norm();
    out.report.relative_residual = bn > 0.0 ? out.report.residual_norm / bn : out.report.residual_norm;
    out.report.jitter_applied = out.report.jitter_applied || cov.jitter_applied();
    return out;
}

/// Minimum-norm form p = C_p W^T (W C_p W^T + alpha I)^{-1} z; only the L x L
/// Gram system is factorized.
inline FieldSolution solve_minimum_norm(const SparseRowMatrix& w, const Eigen::VectorXd& z,
                                        const CovarianceMatrix& cov, double alpha)
{
    if (!(alpha > 0.0))
        throw Error("train", "alpha must be positive");
    detail::check_shapes(w, z, cov);

    FieldSolution out;
    out.report.path = SolverPath::minimum_norm;
    Stopwatch clock;

    const Eigen::MatrixXd cwt = cov.matrix() * w.transpose(); // M x L
    Eigen::MatrixXd gram = w * cwt;                          // L x L
    gram = 0.5 * (gram + gram.transpose());
    gram.diagonal().array() += alpha;
    out.report.timings.add("assemble", clock.lap());

    const auto llt = detail::robust_llt(gram, out.report.jitter_applied, "Gram matrix");
    out.report.factorization_seconds = clock.lap();
    out.report.timings.add("factorize", out.report.factorization_seconds);

    const Eigen::VectorXd y = llt.solve(z);
    out.field = cwt * y;
    out.report.timings.add("solve", clock.lap());

    out.report.residual_norm = (gram * y - z).norm();
    const double zn = z.norm();
    out.report.relative_residual = zn > 0.0 ? out.report.residual_norm / zn : out.report.residual_norm;
    return out;
}

/// Posterior covariance (sigma_n^{-2} W^T W + C_p^{-1})^{-1}.
///
/// With fewer links than pixels it is evaluated in the equivalent form
/// C_p - C_p W^T (W C_p W^T + sigma_n^2 I)^{-1} W C_p, which only factorizes
/// an L x L matrix.
inline Eigen::MatrixXd posterior_covariance(const SparseRowMatrix& w, const CovarianceMatrix& cov, double sigma_n_sq,
                                            std::size_t memory_budget_bytes = kDefaultMemoryBudgetBytes)
{
    if (!(sigma_n_sq > 0.0))
        throw Error("train", "noise variance must be positive");
    if (w.cols() != cov.size())
        throw Error("train", "weight matrix columns do not match the covariance size");
    const double m = static_cast<double>(cov.size());
    if (2.0 * m * m * sizeof(double) > static_cast<double>(memory_budget_bytes))
        throw Error("train", "posterior covariance exceeds the memory budget");

    bool jittered = false;
    if (w.rows() < w.cols()) {
        const Eigen::MatrixXd cwt = cov.matrix() * w.transpose();
        Eigen::MatrixXd gram = w * cwt;
        gram = 0.5 * (gram + gram.transpose());
        gram.diagonal().array() += sigma_n_sq;
        const auto llt = detail::robust_llt(gram, jittered, "posterior Gram matrix");
        Eigen::MatrixXd post = cov.matrix() - cwt * llt.solve(cwt.transpose());
        return 0.5 * (post + post.transpose());
    }

    Eigen::MatrixXd a = cov.precision();
    const Eigen::MatrixXd wtw = Eigen::MatrixXd(w.transpose() * w);
    a += wtw / sigma_n_sq;
    const auto llt = detail::robust_llt(a, jittered, "posterior precision");
    Eigen::MatrixXd post = llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
    return 0.5 * (post + post.transpose());
}

struct TrainingDiagnostics
{
    std::size_t n_links = 0;
    std::size_t n_pixels = 0;
    double fading_variance = 0.0;   ///< centered variance of the training fading losses
    double residual_variance = 0.0; ///< mean squared training residual ||z - W p||^2 / L
    double noise_variance = 0.0;    ///< (1 - shadow_ratio) * fading_variance
    std::size_t empty_rows = 0;     ///< training links whose ellipse holds no pixel center
    bool degenerate = false;        ///< W had no nonzero entry; field left at the prior mean
};

/// A trained loss-field model: everything needed to predict new links.
struct CelfModel
{
    LogDistanceModel pathloss;
    Hyperparameters hyper;
    PixelGrid grid;
    Eigen::VectorXd field;
    FieldPrior prior;
    SolverPath solver_path = SolverPath::map_cholesky;
    TrainingDiagnostics diagnostics;
};

struct TrainOptions
{
    SolverChoice solver = SolverChoice::automatic;
    std::size_t memory_budget_bytes = kDefaultMemoryBudgetBytes;
};

struct TrainResult
{
    CelfModel model;
    SolveReport report;
};

namespace detail {

inline double centered_variance(const Eigen::VectorXd& v)
{
    if (v.size() == 0)
        return 0.0;
    return (v.array() - v.mean()).square().mean();
}

} // namespace detail

/// Learns the loss field from training links whose fading losses are taken
/// relative to `pathloss`.
inline TrainResult train(std::span<const Link> links, const Hyperparameters& hyper, const LogDistanceModel& pathloss,
                         const PixelGrid& grid, const TrainOptions& options = {})
{
    validate(hyper);
    if (links.empty())
        throw Error("train", "training needs at least one link");
    if (std::abs(grid.pixel_width() - hyper.pixel_width) > 1e-12 * hyper.pixel_width)
        throw Error("train", "grid pixel width does not match the pixel_width hyperparameter");

    TrainResult result;
    CelfModel& model = result.model;
    model.pathloss = pathloss;
    model.hyper = hyper;
    model.grid = grid;

    Stopwatch clock;
    const std::vector<double> zs = fading_losses(pathloss, links);
    const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(zs.data(), static_cast<Eigen::Index>(zs.size()));

    const WeightMatrix w = build_weight_matrix(links, grid, hyper.excess_length);
    result.report.timings.add("weights", clock.lap());

    // sigma_X^2 follows from the variance ratio. A constant fading vector has
    // no spread; fall back to its mean square, then to 1 (the field is then
    // driven only by z, which is zero).
    double fading_var = detail::centered_variance(z);
    double spread = fading_var > 0.0 ? fading_var : z.squaredNorm() / static_cast<double>(z.size());
    if (!(spread > 0.0))
        spread = 1.0;
    model.prior = FieldPrior{hyper.shadow_ratio * spread, hyper.space_constant, grid};

    TrainingDiagnostics& diag = model.diagnostics;
    diag.n_links = links.size();
    diag.n_pixels = grid.size();
    diag.fading_variance = fading_var;
    diag.noise_variance = (1.0 - hyper.shadow_ratio) * fading_var;
    diag.empty_rows = w.empty_rows().size();

    model.solver_path = select_solver_path(options.solver, links.size(), grid.size());
    result.report.path = model.solver_path;

    if (w.nonzeros() == 0) {
        diag.degenerate = true;
        model.field = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
        diag.residual_variance = z.squaredNorm() / static_cast<double>(z.size());
        return result;
    }

    const CovarianceMatrix cov = build_covariance(model.prior, options.memory_budget_bytes);
    result.report.timings.add("covariance", clock.lap());

    FieldSolution sol = model.solver_path == SolverPath::minimum_norm
                            ? solve_minimum_norm(w.matrix(), z, cov, hyper.alpha)
                            : solve_map_cholesky(w.matrix(), z, cov, hyper.alpha);
    model.field = std::move(sol.field);
    for (auto& phase : sol.report.timings.phases)
        result.report.timings.add(phase.first, phase.second);
    result.report.factorization_seconds = sol.report.factorization_seconds;
    result.report.residual_norm = sol.report.residual_norm;
    result.report.relative_residual = sol.report.relative_residual;
    result.report.jitter_applied = sol.report.jitter_applied;

    diag.residual_variance = (z - w.matrix() * model.field).squaredNorm() / static_cast<double>(z.size());
    clock.lap();
    return result;
}

struct ShadowingPrediction
{
    Eigen::VectorXd shadowing;            ///< predicted shadowing loss W_T p (dB)
    std::vector<bool> out_of_coverage;    ///< ellipse holds no pixel center; prediction is 0
};

inline ShadowingPrediction predict_shadowing(const CelfModel& model, std::span<const Link> links)
{
    if (model.field.size() != static_cast<Eigen::Index>(model.grid.size()))
        throw Error("predict", "model field length does not match its grid");
    const WeightMatrix wt = build_weight_matrix(links, model.grid, model.hyper.excess_length);
    ShadowingPrediction out;
    out.shadowing = wt.matrix() * model.field;
    out.out_of_coverage.assign(links.size(), false);
    for (std::size_t l : wt.empty_rows())
        out.out_of_coverage[l] = true;
    return out;
}

/// Received power P = mean power - predicted shadowing (dBm).
inline Eigen::VectorXd predict_power(const CelfModel& model, std::span<const Link> links)
{
    const ShadowingPrediction s = predict_shadowing(model, links);
    Eigen::VectorXd power(static_cast<Eigen::Index>(links.size()));
    for (std::size_t l = 0; l < links.size(); ++l)
        power[static_cast<Eigen::Index>(l)] =
            predict_mean_power(model.pathloss, links[l]) - s.shadowing[static_cast<Eigen::Index>(l)];
    return power;
}

} // namespace celf

#endif // CELF_ESTIMATOR_HPP
