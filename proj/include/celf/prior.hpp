#ifndef CELF_PRIOR_HPP
#define CELF_PRIOR_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "celf/error.hpp"
#include "celf/geometry.hpp"

namespace celf {

/// Zero-mean Gaussian loss-field prior with exponential covariance
///   C_p(m, n) = (sigma_x_sq / delta) exp(-d_mn / delta).
struct FieldPrior
{
    double sigma_x_sq = 1.0; ///< shadowing variance (dB^2)
    double delta = 1.0;      ///< space constant (m)
    PixelGrid grid;
};

inline void validate(const FieldPrior& prior)
{
    if (!(prior.sigma_x_sq > 0.0) || !std::isfinite(prior.sigma_x_sq))
        throw Error("prior", "shadowing variance must be positive");
    if (!(prior.delta > 0.0) || !std::isfinite(prior.delta))
        throw Error("prior", "space constant must be positive");
}

inline double exponential_kernel(const FieldPrior& prior, double d) noexcept
{
    return prior.sigma_x_sq / prior.delta * std::exp(-d / prior.delta);
}

/// Relative diagonal jitter applied once when the first factorization fails.
inline constexpr double kCholeskyJitter = 1e-10;

/// Default ceiling on dense covariance storage (matrix plus factor).
inline constexpr std::size_t kDefaultMemoryBudgetBytes = std::size_t{3} << 30;

/// Dense symmetric M x M prior covariance with a lazily computed, cached
/// Cholesky factor. Copies share the matrix and the factor; all const members
/// are safe to call concurrently.
class CovarianceMatrix
{
public:
    CovarianceMatrix() = default;

    explicit CovarianceMatrix(Eigen::MatrixXd cov, double diagonal_value)
        : cov_(std::make_shared<const Eigen::MatrixXd>(std::move(cov))),
          factor_(std::make_shared<FactorState>()),
          diagonal_(diagonal_value)
    {
    }

    const Eigen::MatrixXd& matrix() const { return *cov_; }
    Eigen::Index size() const { return cov_ ? cov_->rows() : 0; }

    /// Cholesky factorization C_p = L L^T. If the first attempt fails, the
    /// diagonal is inflated by kCholeskyJitter * sigma_x_sq / delta and the
    /// factorization retried once; jitter_applied() then reports true.
    const Eigen::LLT<Eigen::MatrixXd>& cholesky() const
    {
        if (!factor_)
            throw Error("prior", "covariance matrix is empty");
        std::call_once(factor_->once, [this] { factorize(); });
        if (factor_->error)
            std::rethrow_exception(factor_->error);
        return factor_->llt;
    }

    Eigen::MatrixXd factor() const { return cholesky().matrixL(); }

    bool jitter_applied() const
    {
        cholesky();
        return factor_->jittered;
    }

    /// Solves C_p x = v by forward/back substitution on the cached factor.
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const
    {
        if (v.size() != size())
            throw Error("prior", "vector length does not match covariance size");
        return cholesky().solve(v);
    }

    /// C_p^{-1}, needed to assemble the normal equations of the MAP solver.
    Eigen::MatrixXd precision() const
    {
        Eigen::MatrixXd p = cholesky().solve(Eigen::MatrixXd::Identity(size(), size()));
        return 0.5 * (p + p.transpose());
    }

private:
    struct FactorState
    {
        std::once_flag once;
        Eigen::LLT<Eigen::MatrixXd> llt;
        bool jittered = false;
        std::exception_ptr error;
    };

    void factorize() const
    {
        FactorState& st = *factor_;
        st.llt.compute(*cov_);
        if (st.llt.info() == Eigen::Success)
            return;
        const double jitter = kCholeskyJitter * diagonal_;
        Eigen::MatrixXd bumped = *cov_;
        bumped.diagonal().array() += jitter;
        st.llt.compute(bumped);
        st.jittered = true;
        if (st.llt.info() != Eigen::Success)
            st.error = std::make_exception_ptr(
                Error("prior", "covariance is not numerically positive definite even after diagonal jitter of " +
                                   std::to_string(jitter) + "; increase the space constant or the pixel width"));
    }

    std::shared_ptr<const Eigen::MatrixXd> cov_;
    std::shared_ptr<FactorState> factor_;
    double diagonal_ = 0.0;
};

inline CovarianceMatrix build_covariance(const FieldPrior& prior,
                                         std::size_t memory_budget_bytes = kDefaultMemoryBudgetBytes)
{
    validate(prior);
    const std::size_t m = prior.grid.size();
    // Matrix plus its Cholesky factor.
    const double bytes = 2.0 * static_cast<double>(m) * static_cast<double>(m) * sizeof(double);
    if (bytes > static_cast<double>(memory_budget_bytes))
        throw Error("prior", "dense covariance for M=" + std::to_string(m) + " pixels needs " +
                                 std::to_string(static_cast<long long>(bytes / (1 << 20))) + " MiB, over the " +
                                 std::to_string(memory_budget_bytes >> 20) + " MiB budget; use a larger pixel width");

    const auto n = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const Point2D ca = prior.grid.center(static_cast<std::size_t>(a));
        cov(a, a) = exponential_kernel(prior, 0.0);
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double k = exponential_kernel(prior, distance(ca, prior.grid.center(static_cast<std::size_t>(b))));
            cov(a, b) = k;
            cov(b, a) = k;
        }
    }
    return CovarianceMatrix(std::move(cov), prior.sigma_x_sq / prior.delta);
}

/// Draws p = L u with u ~ N(0, I) from a seeded 64-bit Mersenne Twister.
inline Eigen::VectorXd sample_field(const CovarianceMatrix& cov, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd u(cov.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
        u[i] = normal(rng);
    return cov.cholesky().matrixL() * u;
}

inline Eigen::VectorXd sample_field(const FieldPrior& prior, std::uint64_t seed)
{
    return sample_field(build_covariance(prior), seed);
}

} // namespace celf

#endif // CELF_PRIOR_HPP
