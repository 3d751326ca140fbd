#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace hypass {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Row-major: one sample or feature vector per row.
using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

using Labels = std::vector<int>;

enum class Domain { Source, Target };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

inline constexpr int NOISE = -1;

// Cluster assignment per point. IDs are contiguous 0..n_clusters-1, NOISE marks
// points left unclustered by density methods.
struct Partition {
    Labels assignment;
    int n_clusters = 0;

    std::size_t size() const { return assignment.size(); }
    int n_noise() const;
};

// Renumbers labels by order of first appearance; NOISE is preserved.
Partition make_partition(const Labels& raw);

// Checks contiguity and range; throws std::logic_error on violation.
void check_partition(const Partition& p, bool allow_noise = true);

// Pairwise Euclidean distances between rows.
template <typename Derived>
MatrixX<typename Derived::Scalar> pairwise_distances(const Eigen::MatrixBase<Derived>& x)
{
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = x.rows();
    MatrixX<Scalar> d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = Scalar(0);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const Scalar v = (x.row(i) - x.row(j)).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return d;
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> cross_distances(const Eigen::MatrixBase<DerivedA>& a,
                                                   const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedA::Scalar;
    MatrixX<Scalar> d(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            d(i, j) = (a.row(i) - b.row(j)).norm();
    return d;
}

// Unit-normalizes each row; zero rows are left untouched.
template <typename Derived>
MatrixX<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& x)
{
    MatrixX<typename Derived::Scalar> out = x;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const auto n = out.row(i).norm();
        if (n > 0) out.row(i) /= n;
    }
    return out;
}

Matrix select_rows(const Matrix& x, const std::vector<std::size_t>& rows);

// Splits a master seed into a stream-specific seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace hypass
