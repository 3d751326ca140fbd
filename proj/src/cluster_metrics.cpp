#include "hypass/cluster_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace hypass {

std::string to_string(MetricKind m)
{
    switch (m) {
    case MetricKind::ARI: return "ari";
    case MetricKind::NMI: return "nmi";
    case MetricKind::PairwiseError: return "pairwise_error";
    }
    return "?";
}

MetricKind metric_kind_from_string(const std::string& s)
{
    if (s == "ari") return MetricKind::ARI;
    if (s == "nmi") return MetricKind::NMI;
    if (s == "pairwise_error") return MetricKind::PairwiseError;
    throw std::invalid_argument("unknown metric '" + s + "'");
}

namespace {

struct Cell {
    int row;
    int col;
    double count;
};

struct Contingency {
    double n = 0;
    std::vector<double> rows;  // marginal counts of the first labeling
    std::vector<double> cols;  // marginal counts of the second labeling
    std::vector<Cell> cells;   // non-zero joint counts
};

// Dense relabeling with NOISE expanded into fresh singleton ids.
std::vector<int> densify(const Labels& labels)
{
    std::unordered_map<int, int> remap;
    std::vector<int> out(labels.size());
    int next = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == NOISE) {
            out[i] = next++;
            continue;
        }
        auto [it, inserted] = remap.try_emplace(labels[i], next);
        if (inserted) ++next;
        out[i] = it->second;
    }
    return out;
}

Contingency contingency(const Labels& a, const Labels& b)
{
    if (a.size() != b.size()) throw std::invalid_argument("metrics: label length mismatch");
    const auto da = densify(a);
    const auto db = densify(b);
    Contingency c;
    c.n = static_cast<double>(a.size());
    const int na = da.empty() ? 0 : *std::max_element(da.begin(), da.end()) + 1;
    const int nb = db.empty() ? 0 : *std::max_element(db.begin(), db.end()) + 1;
    c.rows.assign(static_cast<std::size_t>(na), 0.0);
    c.cols.assign(static_cast<std::size_t>(nb), 0.0);
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < da.size(); ++i) {
        c.rows[static_cast<std::size_t>(da[i])] += 1;
        c.cols[static_cast<std::size_t>(db[i])] += 1;
        joint[{da[i], db[i]}] += 1;
    }
    for (const auto& [key, count] : joint) c.cells.push_back({key.first, key.second, count});
    return c;
}

double comb2(double n) { return n * (n - 1) / 2; }

double sum_comb2(const std::vector<double>& v)
{
    double s = 0;
    for (double x : v) s += comb2(x);
    return s;
}

double sum_comb2(const std::vector<Cell>& v)
{
    double s = 0;
    for (const auto& c : v) s += comb2(c.count);
    return s;
}

double entropy(const std::vector<double>& counts, double n)
{
    double h = 0;
    for (double c : counts)
        if (c > 0) h -= (c / n) * std::log(c / n);
    return h;
}

}  // namespace

double ari(const Labels& a, const Labels& b)
{
    const auto c = contingency(a, b);
    if (c.n < 2) return 1.0;
    const double index = sum_comb2(c.cells);
    const double sa = sum_comb2(c.rows);
    const double sb = sum_comb2(c.cols);
    const double expected = sa * sb / comb2(c.n);
    const double max_index = (sa + sb) / 2;
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

double ari(const Labels& truth, const Partition& pred) { return ari(truth, pred.assignment); }

double nmi(const Labels& a, const Labels& b)
{
    const auto c = contingency(a, b);
    if (c.n == 0) return 1.0;
    const double ha = entropy(c.rows, c.n);
    const double hb = entropy(c.cols, c.n);
    if (ha == 0 && hb == 0) return 1.0;

    double mi = 0;
    for (const auto& cell : c.cells) {
        const double ai = c.rows[static_cast<std::size_t>(cell.row)];
        const double bj = c.cols[static_cast<std::size_t>(cell.col)];
        mi += (cell.count / c.n) * std::log(c.n * cell.count / (ai * bj));
    }
    mi = std::max(mi, 0.0);
    return std::min(1.0, mi / ((ha + hb) / 2));
}

double nmi(const Labels& truth, const Partition& pred) { return nmi(truth, pred.assignment); }

double pairwise_error(const Labels& truth, const Partition& pred)
{
    if (truth.size() < 2) throw std::invalid_argument("pairwise_error: need N >= 2");
    const auto c = contingency(truth, pred.assignment);
    const double index = sum_comb2(c.cells);
    const double disagreements = sum_comb2(c.rows) + sum_comb2(c.cols) - 2 * index;
    return disagreements / comb2(c.n);
}

double selection_score(MetricKind kind, const Labels& truth, const Partition& pred)
{
    switch (kind) {
    case MetricKind::ARI: return ari(truth, pred);
    case MetricKind::NMI: return nmi(truth, pred);
    case MetricKind::PairwiseError: return -pairwise_error(truth, pred);
    }
    throw std::logic_error("selection_score: unknown metric");
}

RetrievalScores retrieval_scores(const Matrix& q, const Matrix& g, const Labels& qid,
                                 const Labels& gid, bool exclude_self)
{
    if (static_cast<std::size_t>(q.rows()) != qid.size() ||
        static_cast<std::size_t>(g.rows()) != gid.size())
        throw std::invalid_argument("retrieval: features/ids length mismatch");
    if (q.cols() != g.cols()) throw std::invalid_argument("retrieval: feature dimension mismatch");
    if (exclude_self && q.rows() != g.rows())
        throw std::invalid_argument("retrieval: exclude_self needs query == gallery");
    if (q.rows() == 0) throw std::invalid_argument("retrieval: no queries");

    const Matrix d = cross_distances(q, g);
    RetrievalScores out;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(g.rows()));
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return d(i, a) < d(i, b); });
        double hits = 0, ap = 0;
        double rank = 0;
        bool first = true;
        for (Eigen::Index j : order) {
            if (exclude_self && j == i) continue;
            rank += 1;
            const bool rel = gid[static_cast<std::size_t>(j)] == qid[static_cast<std::size_t>(i)];
            if (first) {
                out.rank1 += rel ? 1.0 : 0.0;
                first = false;
            }
            if (rel) {
                hits += 1;
                ap += hits / rank;
            }
        }
        if (hits == 0)
            throw std::invalid_argument("retrieval: query id " +
                                        std::to_string(qid[static_cast<std::size_t>(i)]) +
                                        " absent from gallery");
        out.mean_ap += ap / hits;
    }
    out.mean_ap /= static_cast<double>(q.rows());
    out.rank1 /= static_cast<double>(q.rows());
    return out;
}

double mean_average_precision(const Matrix& q, const Matrix& g, const Labels& qid,
                              const Labels& gid, bool exclude_self)
{
    return retrieval_scores(q, g, qid, gid, exclude_self).mean_ap;
}

}  // namespace hypass
