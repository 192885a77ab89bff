#include "ptm/cluster.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "json.hpp"

namespace ptm {

Vec normalized(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    const double n = std::sqrt(s);
    if (n == 0.0) throw Error("cannot normalize zero-norm vector");
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

namespace {

double dot(const Vec& a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Assigns unit points to unit centroid rows; returns total cosine cost.
double assign_points(const std::vector<Vec>& unit, const Matrix& centroids,
                     std::vector<int>* assignments, std::vector<double>* distances) {
    double cost = 0.0;
    for (std::size_t i = 0; i < unit.size(); ++i) {
        int best = 0;
        double best_d = 1.0 - dot(unit[i], centroids.row(0));
        for (std::size_t c = 1; c < centroids.rows; ++c) {
            const double d = 1.0 - dot(unit[i], centroids.row(c));
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        (*assignments)[i] = best;
        (*distances)[i] = best_d;
        cost += best_d;
    }
    return cost;
}

ClusterModel kmeans_once(const std::vector<Vec>& unit, std::size_t k,
                         std::mt19937_64& rng, std::size_t max_iters) {
    const std::size_t n = unit.size();
    const std::size_t d = unit[0].size();
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    // k-means++ seeding on cosine distance.
    Matrix centroids(k, d);
    std::vector<double> min_d(n, 2.0);
    std::size_t first = static_cast<std::size_t>(u01(rng) * static_cast<double>(n));
    if (first >= n) first = n - 1;
    std::copy(unit[first].begin(), unit[first].end(), centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dist = 1.0 - dot(unit[i], centroids.row(c - 1));
            min_d[i] = std::min(min_d[i], std::max(dist, 0.0));
            total += min_d[i] * min_d[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = u01(rng) * total, acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += min_d[i] * min_d[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(u01(rng) * static_cast<double>(n));
            if (pick >= n) pick = n - 1;
        }
        std::copy(unit[pick].begin(), unit[pick].end(), centroids.row(c));
    }

    ClusterModel model;
    model.k = k;
    model.assignments.assign(n, 0);
    model.distances.assign(n, 0.0);

    std::vector<int> prev(n, -1);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        assign_points(unit, centroids, &model.assignments, &model.distances);
        if (model.assignments == prev) break;
        prev = model.assignments;

        Matrix sums(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double* row = sums.row(static_cast<std::size_t>(model.assignments[i]));
            for (std::size_t j = 0; j < d; ++j) row[j] += unit[i][j];
            ++counts[static_cast<std::size_t>(model.assignments[i])];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Re-seed from the point farthest from its centroid.
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i)
                    if (model.distances[i] > model.distances[far]) far = i;
                std::copy(unit[far].begin(), unit[far].end(), centroids.row(c));
                continue;
            }
            double norm = 0.0;
            const double* srow = sums.row(c);
            for (std::size_t j = 0; j < d; ++j) norm += srow[j] * srow[j];
            norm = std::sqrt(norm);
            double* crow = centroids.row(c);
            if (norm == 0.0) continue;  // keep previous centroid
            for (std::size_t j = 0; j < d; ++j) crow[j] = srow[j] / norm;
        }
    }
    assign_points(unit, centroids, &model.assignments, &model.distances);
    model.centroids = std::move(centroids);
    return model;
}

}  // namespace

double kmeans_cost(const ClusterModel& model) {
    double c = 0.0;
    for (double d : model.distances) c += d;
    return c;
}

ClusterModel kmeans(const std::vector<Vec>& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iters, std::size_t restarts) {
    if (k < 2) throw Error("kmeans requires k >= 2");
    if (points.size() < k) throw Error("kmeans requires at least k points");
    std::vector<Vec> unit;
    unit.reserve(points.size());
    for (const Vec& p : points) unit.push_back(normalized(p));

    std::set<Vec> distinct(unit.begin(), unit.end());
    if (distinct.size() < k)
        throw Error("kmeans: fewer distinct points (" + std::to_string(distinct.size()) +
                    ") than k (" + std::to_string(k) + ")");

    std::mt19937_64 rng(seed);
    ClusterModel best;
    double best_cost = 0.0;
    for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
        ClusterModel m = kmeans_once(unit, k, rng, max_iters);
        const double cost = kmeans_cost(m);
        if (r == 0 || cost < best_cost) {
            best_cost = cost;
            best = std::move(m);
        }
    }
    return best;
}

double silhouette(const std::vector<Vec>& points, const std::vector<int>& assignments,
                  std::size_t k) {
    if (k < 2) throw Error("silhouette requires k >= 2");
    const std::size_t n = points.size();
    if (assignments.size() != n) throw Error("silhouette: assignment size mismatch");
    std::vector<Vec> unit;
    unit.reserve(n);
    for (const Vec& p : points) unit.push_back(normalized(p));

    const std::size_t d = unit[0].size();
    // Cosine distance is linear in the unit point, so per-cluster sums give
    // exact mean distances in O(nk).
    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(assignments[i]);
        if (c >= k) throw Error("silhouette: assignment out of range");
        double* row = sums.row(c);
        for (std::size_t j = 0; j < d; ++j) row[j] += unit[i][j];
        ++counts[c];
    }
    for (std::size_t c = 0; c < k; ++c)
        if (counts[c] == 0) throw Error("silhouette: empty cluster " + std::to_string(c));

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(assignments[i]);
        if (counts[own] == 1) continue;  // singleton: s = 0
        const double self_sim = dot(unit[i], sums.row(own));
        const double a =
            1.0 - (self_sim - 1.0) / static_cast<double>(counts[own] - 1);
        double b = 2.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (c == own) continue;
            const double mean_d =
                1.0 - dot(unit[i], sums.row(c)) / static_cast<double>(counts[c]);
            b = std::min(b, mean_d);
        }
        // Degenerate a = b = 0 (identical points) scores 0; the epsilon
        // keeps rounding residue from blowing up the ratio.
        const double m = std::max(a, b);
        if (m > 1e-12) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

std::size_t select_topic_count(const std::vector<Vec>& points, std::size_t k_lo,
                               std::size_t k_hi, std::size_t sample_size,
                               std::uint64_t seed) {
    if (k_lo < 2 || k_hi < k_lo) throw Error("invalid k range");
    if (points.size() < k_hi) throw Error("need at least max(k_range) points");
    std::vector<Vec> sample;
    if (points.size() > sample_size) {
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> idx(points.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(sample_size);
        std::sort(idx.begin(), idx.end());
        for (std::size_t i : idx) sample.push_back(points[i]);
    } else {
        sample = points;
    }

    std::size_t best_k = k_lo;
    double best_score = -2.0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
        ClusterModel m = kmeans(sample, k, seed);
        const double score = silhouette(sample, m.assignments, k);
        if (score > best_score) {
            best_score = score;
            best_k = k;
        }
    }
    return best_k;
}

ConfidentSelection select_confident(const ClusterModel& model, double t_percent) {
    if (!(t_percent > 0.0) || t_percent > 100.0)
        throw Error("t percent must be in (0, 100]");
    ConfidentSelection sel;
    sel.t_percent = t_percent;
    for (std::size_t c = 0; c < model.k; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < model.assignments.size(); ++i)
            if (model.assignments[i] == static_cast<int>(c)) members.push_back(i);
        if (members.empty()) continue;
        std::stable_sort(members.begin(), members.end(),
                         [&](std::size_t a, std::size_t b) {
                             if (model.distances[a] != model.distances[b])
                                 return model.distances[a] < model.distances[b];
                             return a < b;
                         });
        const auto take = static_cast<std::size_t>(
            std::ceil(t_percent / 100.0 * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < take && i < members.size(); ++i) {
            sel.indices.push_back(members[i]);
            sel.labels.push_back(static_cast<int>(c));
        }
    }
    return sel;
}

std::vector<std::pair<std::string, int>> majority_vote(
    const std::vector<std::string>& point_keys, const ConfidentSelection& confident,
    const ClusterModel& model, const std::vector<Vec>& points) {
    // key -> (label -> confident point indices), keys in first-seen order.
    std::vector<std::string> key_order;
    std::map<std::string, std::map<int, std::vector<std::size_t>>> votes;
    for (std::size_t i = 0; i < confident.indices.size(); ++i) {
        const std::size_t p = confident.indices[i];
        const std::string& key = point_keys.at(p);
        if (!votes.count(key)) key_order.push_back(key);
        votes[key][confident.labels[i]].push_back(p);
    }
    std::sort(key_order.begin(), key_order.end());

    std::vector<std::pair<std::string, int>> result;
    for (const std::string& key : key_order) {
        const auto& by_label = votes[key];
        std::size_t best_count = 0;
        for (const auto& [label, insts] : by_label)
            best_count = std::max(best_count, insts.size());
        int best_label = -1;
        double best_sim = 0.0;
        for (const auto& [label, insts] : by_label) {
            if (insts.size() != best_count) continue;
            double sim = 0.0;
            const double* crow = model.centroids.row(static_cast<std::size_t>(label));
            for (std::size_t p : insts) sim += dot(normalized(points[p]), crow);
            if (best_label < 0 || sim > best_sim) {
                best_label = label;
                best_sim = sim;
            }
            // Equal summed similarity keeps the lower label (map order).
        }
        result.emplace_back(key, best_label);
    }
    return result;
}

void save_cluster_model(const ClusterModel& model, const std::string& path) {
    nlohmann::json j;
    j["k"] = model.k;
    j["d"] = model.centroids.cols;
    j["metric"] = "cosine";
    j["centroids"] = model.centroids.data;
    j["assignments"] = model.assignments;
    j["distances"] = model.distances;
    std::ofstream out(path);
    if (!out) throw Error("cannot write cluster model: " + path);
    out << j.dump() << "\n";
}

ClusterModel load_cluster_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open cluster model: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corrupt cluster model " + path + ": " + e.what());
    }
    ClusterModel m;
    try {
        m.k = j.at("k").get<std::size_t>();
        const auto d = j.at("d").get<std::size_t>();
        if (j.at("metric").get<std::string>() != "cosine")
            throw Error("unsupported cluster metric");
        m.centroids = Matrix(m.k, d);
        m.centroids.data = j.at("centroids").get<std::vector<double>>();
        m.assignments = j.at("assignments").get<std::vector<int>>();
        m.distances = j.at("distances").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corrupt cluster model " + path + ": " + e.what());
    }
    if (m.centroids.data.size() != m.k * m.centroids.cols)
        throw ParseError("cluster model " + path + ": dimension mismatch");
    return m;
}

}  // namespace ptm
