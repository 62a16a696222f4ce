#ifndef CELF_TESTS_SUPPORT_HPP
#define CELF_TESTS_SUPPORT_HPP

// Shared fixtures and independent reference implementations for the tests.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "celf/celf.hpp"

namespace celf::test {

/// Dense weight matrix straight from the ellipse rule: every (link, pixel)
/// pair is tested with no windowing.
inline Eigen::MatrixXd dense_weights(const std::vector<Link>& links, const PixelGrid& grid, double lambda)
{
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(links.size()),
                                              static_cast<Eigen::Index>(grid.size()));
    for (std::size_t l = 0; l < links.size(); ++l) {
        const Point2D a = links[l].tx();
        const Point2D b = links[l].rx();
        const double dl = std::hypot(a.x - b.x, a.y - b.y);
        for (std::size_t col = 0; col < grid.n_cols(); ++col) {
            for (std::size_t row = 0; row < grid.n_rows(); ++row) {
                const double cx = grid.origin().x + (static_cast<double>(col) + 0.5) * grid.pixel_width();
                const double cy = grid.origin().y + (static_cast<double>(row) + 0.5) * grid.pixel_width();
                const double d1 = std::hypot(cx - a.x, cy - a.y);
                const double d2 = std::hypot(cx - b.x, cy - b.y);
                if (d1 + d2 < dl + lambda)
                    w(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(row * grid.n_cols() + col)) =
                        1.0 / std::sqrt(dl);
            }
        }
    }
    return w;
}

/// Dense covariance by a plain double loop over pixel centers.
inline Eigen::MatrixXd dense_covariance(const PixelGrid& grid, double sigma_x_sq, double delta)
{
    const auto m = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd c(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            const Point2D a = grid.center(static_cast<std::size_t>(i));
            const Point2D b = grid.center(static_cast<std::size_t>(j));
            c(i, j) = sigma_x_sq / delta * std::exp(-std::hypot(a.x - b.x, a.y - b.y) / delta);
        }
    return c;
}

/// Random links with endpoints uniform in [0, extent]^2 (distinct endpoints).
inline std::vector<Link> random_links(std::size_t n, double extent, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, extent);
    std::normal_distribution<double> rss(-60.0, 5.0);
    std::vector<Link> links;
    while (links.size() < n) {
        const Point2D a{u(rng), u(rng)};
        const Point2D b{u(rng), u(rng)};
        if (distance(a, b) > 1e-3 * extent)
            links.emplace_back(a, b, rss(rng));
    }
    return links;
}

/// Random weight matrix with the ellipse structure: L links over a grid with
/// exactly M pixels, lambda chosen so most rows are non-empty.
struct RandomInstance
{
    PixelGrid grid;
    std::vector<Link> links;
    WeightMatrix w;
    CovarianceMatrix cov;
    Eigen::VectorXd z;
};

inline RandomInstance random_instance(std::size_t n_links, std::size_t n_pixels, std::mt19937_64& rng)
{
    // Pick the most square factorization n_cols * n_rows = n_pixels.
    std::size_t rows = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_pixels)));
    while (n_pixels % rows != 0)
        --rows;
    const std::size_t cols = n_pixels / rows;
    const double pw = 1.0;
    PixelGrid grid({0.0, 0.0}, pw, cols, rows);

    std::uniform_real_distribution<double> ux(0.0, static_cast<double>(cols) * pw);
    std::uniform_real_distribution<double> uy(0.0, static_cast<double>(rows) * pw);
    std::uniform_real_distribution<double> ud(0.5, 3.0);
    std::normal_distribution<double> gauss(0.0, 3.0);
    std::vector<Link> links;
    while (links.size() < n_links) {
        const Point2D a{ux(rng), uy(rng)};
        const Point2D b{ux(rng), uy(rng)};
        if (distance(a, b) > 0.1)
            links.emplace_back(a, b, gauss(rng));
    }
    const double delta = ud(rng);
    WeightMatrix w = build_weight_matrix(links, grid, 0.8);
    CovarianceMatrix cov = build_covariance(FieldPrior{1.0 + ud(rng), delta, grid});
    Eigen::VectorXd z(static_cast<Eigen::Index>(n_links));
    for (auto& v : z)
        v = gauss(rng);
    return {grid, std::move(links), std::move(w), std::move(cov), std::move(z)};
}

/// (W^T W + alpha C_p^{-1})^{-1} W^T z with explicit dense inverses.
inline Eigen::VectorXd dense_map_oracle(const Eigen::MatrixXd& w, const Eigen::MatrixXd& c, double alpha,
                                        const Eigen::VectorXd& z)
{
    const Eigen::MatrixXd a = w.transpose() * w + alpha * c.inverse();
    return a.inverse() * (w.transpose() * z);
}

inline double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    const double scale = std::max(b.norm(), 1e-300);
    return (a - b).norm() / scale;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b)
{
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace celf::test

#endif // CELF_TESTS_SUPPORT_HPP
