#include "hypass/clustering.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hypass {

std::string to_string(ClusteringAlgorithm a)
{
    switch (a) {
    case ClusteringAlgorithm::DBSCAN: return "dbscan";
    case ClusteringAlgorithm::KMeans: return "kmeans";
    case ClusteringAlgorithm::Agglomerative: return "agglomerative";
    }
    return "?";
}

ClusteringAlgorithm clustering_algorithm_from_string(const std::string& s)
{
    if (s == "dbscan") return ClusteringAlgorithm::DBSCAN;
    if (s == "kmeans") return ClusteringAlgorithm::KMeans;
    if (s == "agglomerative") return ClusteringAlgorithm::Agglomerative;
    throw std::invalid_argument("unknown clustering algorithm '" + s + "'");
}

void ClusteringSpec::validate() const
{
    if (!(eps >= 0)) throw std::invalid_argument("clustering: eps must be >= 0");
    if (k < 1) throw std::invalid_argument("clustering: k must be >= 1");
    if (min_samples < 1) throw std::invalid_argument("clustering: min_samples must be >= 1");
}

Partition dbscan_precomputed(const Matrix& d, double eps, int min_samples)
{
    const Eigen::Index n = d.rows();
    if (n == 0) throw std::invalid_argument("dbscan: empty input");
    if (!(eps >= 0)) throw std::invalid_argument("dbscan: eps must be >= 0");
    if (min_samples < 1) throw std::invalid_argument("dbscan: min_samples must be >= 1");

    std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
    std::vector<char> core(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& nb = neighbors[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j)
            if (d(i, j) <= eps) nb.push_back(static_cast<int>(j));
        core[static_cast<std::size_t>(i)] = static_cast<int>(nb.size()) >= min_samples;
    }

    Partition p;
    p.assignment.assign(static_cast<std::size_t>(n), NOISE);
    int next_id = 0;
    std::deque<int> queue;
    for (Eigen::Index s = 0; s < n; ++s) {
        if (!core[s] || p.assignment[s] != NOISE) continue;
        const int id = next_id++;
        p.assignment[s] = id;
        queue.push_back(static_cast<int>(s));
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            for (int v : neighbors[u]) {
                if (core[v] && p.assignment[v] == NOISE) {
                    p.assignment[v] = id;
                    queue.push_back(v);
                }
            }
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (core[i]) continue;
        // Nearest adjacent core decides, so the result does not depend on row
        // order; equidistant cores fall back to the lowest cluster id.
        int best = NOISE;
        double best_d = 0.0;
        for (int v : neighbors[i]) {
            if (!core[v]) continue;
            const double dv = d(i, v);
            if (best == NOISE || dv < best_d || (dv == best_d && p.assignment[v] < best)) {
                best = p.assignment[v];
                best_d = dv;
            }
        }
        p.assignment[i] = best;
    }
    p.n_clusters = next_id;
    return p;
}

Partition dbscan(const Matrix& points, double eps, int min_samples)
{
    if (points.rows() == 0) throw std::invalid_argument("dbscan: empty input");
    return dbscan_precomputed(pairwise_distances(points), eps, min_samples);
}

namespace {

// Nearest-centroid assignment, returning the inertia; ties go to
// the lower centroid index.
double assign_nearest(const Matrix& x, const Matrix& c, std::vector<int>& assignment)
{
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (Eigen::Index j = 0; j < c.rows(); ++j) {
            const double v = (x.row(i) - c.row(j)).squaredNorm();
            if (v < best) {
                best = v;
                arg = static_cast<int>(j);
            }
        }
        assignment[static_cast<std::size_t>(i)] = arg;
        inertia += best;
    }
    return inertia;
}

Matrix kmeanspp_seed(const Matrix& x, int k, std::mt19937_64& rng)
{
    const Eigen::Index n = x.rows();
    Matrix c(k, x.cols());
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    Eigen::Index first = pick(rng);
    c.row(0) = x.row(first);
    chosen[static_cast<std::size_t>(first)] = 1;
    Vector d2(n);
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = (x.row(i) - c.row(0)).squaredNorm();
    for (int m = 1; m < k; ++m) {
        const double total = d2.sum();
        Eigen::Index next = -1;
        if (total > 0) {
            std::uniform_real_distribution<double> u(0.0, total);
            const double r = u(rng);
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (d2(i) > 0 && acc >= r) {
                    next = i;
                    break;
                }
            }
            if (next < 0)
                for (Eigen::Index i = n - 1; i >= 0; --i)
                    if (d2(i) > 0) {
                        next = i;
                        break;
                    }
        } else {
            for (Eigen::Index i = 0; i < n; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) {
                    next = i;
                    break;
                }
        }
        chosen[static_cast<std::size_t>(next)] = 1;
        c.row(m) = x.row(next);
        for (Eigen::Index i = 0; i < n; ++i)
            d2(i) = std::min(d2(i), (x.row(i) - c.row(m)).squaredNorm());
    }
    return c;
}

}  // namespace

KMeansResult kmeans_full(const Matrix& x, int k, std::uint64_t seed, int max_iter)
{
    const Eigen::Index n = x.rows();
    if (n == 0) throw std::invalid_argument("kmeans: empty input");
    if (k < 1 || k > n) throw std::invalid_argument("kmeans: need 1 <= k <= N");
    if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");

    std::mt19937_64 rng(seed);
    KMeansResult r;
    r.centroids = kmeanspp_seed(x, k, rng);
    std::vector<int> assignment(static_cast<std::size_t>(n), -1);
    std::vector<int> previous;
    for (int it = 0; it < max_iter; ++it) {
        r.inertia_trace.push_back(assign_nearest(x, r.centroids, assignment));
        r.iterations = it + 1;
        if (assignment == previous) break;
        previous = assignment;

        Matrix sums = Matrix::Zero(k, x.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assignment[i]) += x.row(i);
            ++counts[static_cast<std::size_t>(assignment[i])];
        }
        for (int j = 0; j < k; ++j)
            if (counts[static_cast<std::size_t>(j)] > 0)
                r.centroids.row(j) = sums.row(j) / counts[static_cast<std::size_t>(j)];
        for (int j = 0; j < k; ++j) {
            if (counts[static_cast<std::size_t>(j)] > 0) continue;
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (counts[static_cast<std::size_t>(assignment[i])] < 2) continue;
                const double v = (x.row(i) - r.centroids.row(assignment[i])).squaredNorm();
                if (v > far_d) {
                    far_d = v;
                    far = i;
                }
            }
            if (far_d < 0) continue;
            --counts[static_cast<std::size_t>(assignment[far])];
            assignment[far] = j;
            counts[static_cast<std::size_t>(j)] = 1;
            r.centroids.row(j) = x.row(far);
        }
    }
    r.partition = make_partition(assignment);
    return r;
}

Partition kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iter)
{
    return kmeans_full(points, k, seed, max_iter).partition;
}

Dendrogram::Dendrogram(const Matrix& distances) : n_(static_cast<std::size_t>(distances.rows()))
{
    if (n_ == 0) throw std::invalid_argument("agglomerative: empty input");
    Matrix link = distances;
    std::vector<int> size(n_, 1);
    std::vector<char> active(n_, 1);
    merges_.reserve(n_ - 1);
    for (std::size_t step = 0; step + 1 < n_; ++step) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (std::size_t i = 0; i < n_; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n_; ++j) {
                if (active[j] && link(i, j) < best) {
                    best = link(i, j);
                    bi = static_cast<int>(i);
                    bj = static_cast<int>(j);
                }
            }
        }
        merges_.push_back({bi, bj, best});
        // Lance-Williams update for average linkage; cluster bi absorbs bj.
        const double wi = size[bi], wj = size[bj];
        for (std::size_t m = 0; m < n_; ++m) {
            if (!active[m] || static_cast<int>(m) == bi || static_cast<int>(m) == bj) continue;
            const double v = (wi * link(bi, m) + wj * link(bj, m)) / (wi + wj);
            link(bi, m) = v;
            link(m, bi) = v;
        }
        size[bi] += size[bj];
        active[bj] = 0;
    }
}

Partition Dendrogram::cut(double threshold) const
{
    if (!(threshold >= 0)) throw std::invalid_argument("agglomerative: threshold must be >= 0");
    std::vector<int> parent(n_);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (const auto& m : merges_) {
        if (m.height > threshold) break;
        parent[find(m.b)] = find(m.a);
    }
    Labels roots(n_);
    for (std::size_t i = 0; i < n_; ++i) roots[i] = find(static_cast<int>(i));
    return make_partition(roots);
}

Partition agglomerative_precomputed(const Matrix& distances, double distance_threshold)
{
    if (!(distance_threshold >= 0)) throw std::invalid_argument("agglomerative: threshold must be >= 0");
    return Dendrogram(distances).cut(distance_threshold);
}

Partition agglomerative(const Matrix& points, double distance_threshold)
{
    if (points.rows() == 0) throw std::invalid_argument("agglomerative: empty input");
    return agglomerative_precomputed(pairwise_distances(points), distance_threshold);
}

Partition cluster(const Matrix& points, const ClusteringSpec& spec)
{
    spec.validate();
    switch (spec.algorithm) {
    case ClusteringAlgorithm::DBSCAN: return dbscan(points, spec.eps, spec.min_samples);
    case ClusteringAlgorithm::KMeans: return kmeans(points, spec.k, spec.seed, spec.max_iter);
    case ClusteringAlgorithm::Agglomerative: return agglomerative(points, spec.eps);
    }
    throw std::logic_error("cluster: unknown algorithm");
}

}  // namespace hypass
