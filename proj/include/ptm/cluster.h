#ifndef PTM_CLUSTER_H_
#define PTM_CLUSTER_H_

#include <string>
#include <utility>
#include <vector>

#include "ptm/common.h"

namespace ptm {

// Spherical K-Means result: unit-norm centroids are the topic
// representations; distances are cosine distance 1 - cos to the assigned
// centroid.
struct ClusterModel {
    std::size_t k = 0;
    Matrix centroids;  // k x d, rows unit norm
    std::vector<int> assignments;
    std::vector<double> distances;
};

// k-means++ seeding, Lloyd iterations with centroid renormalization,
// cosine distance. Deterministic given seed. Runs `restarts` independent
// seedings and keeps the lowest-cost result.
ClusterModel kmeans(const std::vector<Vec>& points, std::size_t k,
                    std::uint64_t seed, std::size_t max_iters = 200,
                    std::size_t restarts = 10);

double kmeans_cost(const ClusterModel& model);

// Mean silhouette under cosine distance; singleton clusters and degenerate
// a = b = 0 points score 0.
double silhouette(const std::vector<Vec>& points, const std::vector<int>& assignments,
                  std::size_t k);

// Sweeps k over [k_lo, k_hi], picks the largest silhouette (ties -> smallest
// k). Points are subsampled without replacement above sample_size.
std::size_t select_topic_count(const std::vector<Vec>& points, std::size_t k_lo,
                               std::size_t k_hi, std::size_t sample_size,
                               std::uint64_t seed);

struct ConfidentSelection {
    std::vector<std::size_t> indices;  // into the clustered point list
    std::vector<int> labels;           // parallel to indices
    double t_percent = 0.0;
};

// Per cluster, the ceil(t% * cluster size) instances closest to the
// centroid; distance ties go to the lower point ordinal.
ConfidentSelection select_confident(const ClusterModel& model, double t_percent);

// Lifts confident instance labels to mentions by majority vote. Ties break
// by larger summed similarity of the tied label's instances to its centroid,
// then lower cluster index. Keys with no confident instance are absent.
std::vector<std::pair<std::string, int>> majority_vote(
    const std::vector<std::string>& point_keys, const ConfidentSelection& confident,
    const ClusterModel& model, const std::vector<Vec>& points);

void save_cluster_model(const ClusterModel& model, const std::string& path);
ClusterModel load_cluster_model(const std::string& path);

Vec normalized(const Vec& v);  // throws on zero norm

}  // namespace ptm

#endif  // PTM_CLUSTER_H_
