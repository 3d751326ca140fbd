#pragma once

#include "hypass/types.hpp"

#include <cstdint>
#include <string>

namespace hypass {

enum class ClusteringAlgorithm { DBSCAN, KMeans, Agglomerative };

std::string to_string(ClusteringAlgorithm a);
ClusteringAlgorithm clustering_algorithm_from_string(const std::string& s);

struct ClusteringSpec {
    ClusteringAlgorithm algorithm = ClusteringAlgorithm::DBSCAN;
    double eps = 0.5;      // DBSCAN radius / agglomerative distance threshold
    int k = 8;             // k-means cluster count
    int min_samples = 4;   // DBSCAN core-point neighborhood size (self included)
    std::uint64_t seed = 0;
    int max_iter = 100;

    void validate() const;
};

// DBSCAN over a precomputed symmetric distance matrix. Cluster ids follow the
// order of the lowest-index core point of each cluster; a border point joins
// the cluster of its nearest core point, ties to the lowest cluster id.
Partition dbscan_precomputed(const Matrix& distances, double eps, int min_samples);
Partition dbscan(const Matrix& points, double eps, int min_samples);

struct KMeansResult {
    Partition partition;
    Matrix centroids;
    std::vector<double> inertia_trace;  // after each Lloyd iteration
    int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations; an emptied cluster is
// re-seeded at the point farthest from its assigned centroid.
KMeansResult kmeans_full(const Matrix& points, int k, std::uint64_t seed, int max_iter = 100);
Partition kmeans(const Matrix& points, int k, std::uint64_t seed, int max_iter = 100);

// Average-linkage agglomeration: merges the closest pair while its linkage
// distance is <= threshold.
Partition agglomerative_precomputed(const Matrix& distances, double distance_threshold);
Partition agglomerative(const Matrix& points, double distance_threshold);

// Average-linkage merge heights, computed once and cut at many thresholds.
class Dendrogram {
public:
    explicit Dendrogram(const Matrix& distances);

    Partition cut(double distance_threshold) const;
    std::size_t size() const { return n_; }

private:
    struct Merge {
        int a;
        int b;
        double height;
    };
    std::size_t n_ = 0;
    std::vector<Merge> merges_;
};

Partition cluster(const Matrix& points, const ClusteringSpec& spec);

}  // namespace hypass
