#ifndef CELF_GEOMETRY_HPP
#define CELF_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "celf/error.hpp"

namespace celf {

/// Planar position in meters.
struct Point2D
{
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2D&, const Point2D&) = default;
};

inline double distance(Point2D a, Point2D b) noexcept
{
    return std::hypot(b.x - a.x, b.y - a.y);
}

/// A transmitter/receiver pair with its measured received power (dBm).
///
/// Construction rejects coincident endpoints and non-finite values, so every
/// Link in the library has a strictly positive length.
class Link
{
public:
    Link(Point2D tx, Point2D rx, double rss_dbm, std::string id = {})
        : tx_(tx), rx_(rx), rss_(rss_dbm), id_(std::move(id))
    {
        if (!std::isfinite(tx.x) || !std::isfinite(tx.y) || !std::isfinite(rx.x) || !std::isfinite(rx.y))
            throw Error("geometry", "link endpoint coordinates must be finite");
        if (!std::isfinite(rss_dbm))
            throw Error("geometry", "link received power must be finite");
        length_ = celf::distance(tx, rx);
        if (!(length_ > 0.0))
            throw Error("geometry", "link endpoints coincide (zero-length link)");
    }

    Point2D tx() const noexcept { return tx_; }
    Point2D rx() const noexcept { return rx_; }
    double rss() const noexcept { return rss_; }
    const std::string& id() const noexcept { return id_; }
    double length() const noexcept { return length_; }

private:
    Point2D tx_;
    Point2D rx_;
    double rss_;
    std::string id_;
    double length_ = 0.0;
};

inline double link_distance(const Link& link) noexcept { return link.length(); }

/// Square-pixel discretization of the site. Pixels are indexed row-major from
/// the lower-left corner: m = row * n_cols + col.
class PixelGrid
{
public:
    PixelGrid() = default;

    PixelGrid(Point2D origin, double pixel_width, std::size_t n_cols, std::size_t n_rows)
        : origin_(origin), width_(pixel_width), cols_(n_cols), rows_(n_rows)
    {
        if (!std::isfinite(origin.x) || !std::isfinite(origin.y))
            throw Error("geometry", "grid origin must be finite");
        if (!(pixel_width > 0.0) || !std::isfinite(pixel_width))
            throw Error("geometry", "pixel width must be positive");
        if (n_cols == 0 || n_rows == 0)
            throw Error("geometry", "grid must contain at least one pixel");
    }

    Point2D origin() const noexcept { return origin_; }
    double pixel_width() const noexcept { return width_; }
    std::size_t n_cols() const noexcept { return cols_; }
    std::size_t n_rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return cols_ * rows_; }

    Point2D center(std::size_t col, std::size_t row) const noexcept
    {
        return {origin_.x + (static_cast<double>(col) + 0.5) * width_,
                origin_.y + (static_cast<double>(row) + 0.5) * width_};
    }

    Point2D center(std::size_t m) const noexcept { return center(m % cols_, m / cols_); }

    std::size_t index(std::size_t col, std::size_t row) const noexcept { return row * cols_ + col; }

    friend bool operator==(const PixelGrid&, const PixelGrid&) = default;

private:
    Point2D origin_{};
    double width_ = 1.0;
    std::size_t cols_ = 1;
    std::size_t rows_ = 1;
};

namespace detail {

inline std::size_t covering_count(double extent, double width)
{
    // Absorb the rounding in e.g. 17.5 / 0.35 so exact tilings are not padded.
    const double n = std::ceil(extent / width - 1e-9);
    return n < 1.0 ? std::size_t{1} : static_cast<std::size_t>(n);
}

} // namespace detail

/// Smallest grid of `pixel_width` pixels covering the bounding box of all link
/// endpoints, expanded by `margin` on every side.
inline PixelGrid grid_from_links(std::span<const Link> links, double pixel_width, double margin = 0.0)
{
    if (links.empty())
        throw Error("geometry", "cannot build a pixel grid from an empty link list");
    if (!(pixel_width > 0.0))
        throw Error("geometry", "pixel width must be positive");
    if (!(margin >= 0.0))
        throw Error("geometry", "grid margin must be non-negative");

    double min_x = links.front().tx().x, max_x = min_x;
    double min_y = links.front().tx().y, max_y = min_y;
    for (const Link& link : links)
        for (Point2D p : {link.tx(), link.rx()}) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }

    const Point2D origin{min_x - margin, min_y - margin};
    return PixelGrid(origin, pixel_width,
                     detail::covering_count(max_x - min_x + 2.0 * margin, pixel_width),
                     detail::covering_count(max_y - min_y + 2.0 * margin, pixel_width));
}

/// Nonzero pattern of one weight-matrix row. Every selected pixel carries the
/// same weight 1/sqrt(d_l).
struct LinkWeights
{
    double weight = 0.0;
    std::vector<std::size_t> pixels; // ascending
};

/// Ellipse membership test: the pixel center lies strictly inside the ellipse
/// with the link endpoints as foci and major axis d_l + lambda.
inline bool in_link_ellipse(const Link& link, Point2D c, double lambda) noexcept
{
    return distance(c, link.tx()) + distance(c, link.rx()) < link.length() + lambda;
}

inline LinkWeights link_weights(const Link& link, const PixelGrid& grid, double lambda)
{
    if (!(lambda > 0.0))
        throw Error("geometry", "excess length lambda must be positive");

    LinkWeights row;
    row.weight = 1.0 / std::sqrt(link.length());

    // Any point inside the ellipse is within a semi-major axis of its center;
    // scan only that window, padded by one pixel.
    const double semi_major = 0.5 * (link.length() + lambda);
    const Point2D mid{0.5 * (link.tx().x + link.rx().x), 0.5 * (link.tx().y + link.rx().y)};
    const double w = grid.pixel_width();
    const auto clamp_range = [w](double lo, double hi, double origin, std::size_t n) {
        const double first = std::floor((lo - origin) / w - 0.5) - 1.0;
        const double last = std::ceil((hi - origin) / w - 0.5) + 1.0;
        const double top = static_cast<double>(n) - 1.0;
        if (last < 0.0 || first > top)
            return std::pair<std::size_t, std::size_t>{1, 0};
        return std::pair{static_cast<std::size_t>(std::max(first, 0.0)),
                         static_cast<std::size_t>(std::min(last, top))};
    };
    const auto [c0, c1] = clamp_range(mid.x - semi_major, mid.x + semi_major, grid.origin().x, grid.n_cols());
    const auto [r0, r1] = clamp_range(mid.y - semi_major, mid.y + semi_major, grid.origin().y, grid.n_rows());

    for (std::size_t r = r0; r <= r1 && r0 <= r1; ++r)
        for (std::size_t c = c0; c <= c1 && c0 <= c1; ++c)
            if (in_link_ellipse(link, grid.center(c, r), lambda))
                row.pixels.push_back(grid.index(c, r));
    return row;
}

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, std::ptrdiff_t>;

/// L x M ellipse-model weight matrix.
class WeightMatrix
{
public:
    WeightMatrix() = default;

    explicit WeightMatrix(SparseRowMatrix matrix) : matrix_(std::move(matrix))
    {
        matrix_.makeCompressed();
        row_nnz_.resize(static_cast<std::size_t>(matrix_.rows()));
        for (Eigen::Index l = 0; l < matrix_.rows(); ++l) {
            row_nnz_[static_cast<std::size_t>(l)] =
                static_cast<std::size_t>(matrix_.outerIndexPtr()[l + 1] - matrix_.outerIndexPtr()[l]);
            if (row_nnz_[static_cast<std::size_t>(l)] == 0)
                empty_rows_.push_back(static_cast<std::size_t>(l));
        }
    }

    const SparseRowMatrix& matrix() const noexcept { return matrix_; }
    std::size_t rows() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(matrix_.cols()); }
    std::size_t nonzeros() const noexcept { return static_cast<std::size_t>(matrix_.nonZeros()); }
    const std::vector<std::size_t>& row_nonzeros() const noexcept { return row_nnz_; }

    /// Links whose ellipse contains no pixel center.
    const std::vector<std::size_t>& empty_rows() const noexcept { return empty_rows_; }

    double density() const noexcept
    {
        const double total = static_cast<double>(rows()) * static_cast<double>(cols());
        return total > 0.0 ? static_cast<double>(nonzeros()) / total : 0.0;
    }

    /// Number of links touching each pixel.
    std::vector<std::size_t> column_counts() const
    {
        std::vector<std::size_t> counts(cols(), 0);
        for (Eigen::Index k = 0; k < matrix_.nonZeros(); ++k)
            ++counts[static_cast<std::size_t>(matrix_.innerIndexPtr()[k])];
        return counts;
    }

private:
    SparseRowMatrix matrix_;
    std::vector<std::size_t> row_nnz_;
    std::vector<std::size_t> empty_rows_;
};

inline WeightMatrix build_weight_matrix(std::span<const Link> links, const PixelGrid& grid, double lambda)
{
    const auto n_links = static_cast<Eigen::Index>(links.size());
    SparseRowMatrix w(n_links, static_cast<Eigen::Index>(grid.size()));

    std::vector<LinkWeights> rows;
    rows.reserve(links.size());
    Eigen::VectorX<std::ptrdiff_t> reserve(n_links);
    for (Eigen::Index l = 0; l < n_links; ++l) {
        rows.push_back(link_weights(links[static_cast<std::size_t>(l)], grid, lambda));
        reserve[l] = static_cast<std::ptrdiff_t>(rows.back().pixels.size());
    }
    w.reserve(reserve);
    for (Eigen::Index l = 0; l < n_links; ++l) {
        const LinkWeights& row = rows[static_cast<std::size_t>(l)];
        for (std::size_t m : row.pixels)
            w.insert(l, static_cast<Eigen::Index>(m)) = row.weight;
    }
    return WeightMatrix(std::move(w));
}

} // namespace celf

#endif // CELF_GEOMETRY_HPP
