#include "hypass/alignment.hpp"

#include "hypass/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hypass {

SimilaritySample pair_similarities(const Matrix& f, const Labels& labels, PairRelation relation,
                                   std::size_t max_pairs, std::uint64_t seed, Domain domain)
{
    const Eigen::Index n = f.rows();
    if (relation != PairRelation::All && static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("pair_similarities: labels required for conditional pairs");
    SimilaritySample out;
    out.relation = relation;
    out.domain = domain;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (relation != PairRelation::All) {
                const int li = labels[static_cast<std::size_t>(i)];
                const int lj = labels[static_cast<std::size_t>(j)];
                if (li == NOISE || lj == NOISE) continue;
                if ((li == lj) != (relation == PairRelation::Positive)) continue;
            }
            out.pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }
    if (relation == PairRelation::Positive && out.pairs.empty())
        throw std::invalid_argument("pair_similarities: no same-label pair");
    if (max_pairs > 0 && out.pairs.size() > max_pairs) {
        std::vector<std::size_t> idx(out.pairs.size());
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        std::mt19937_64 rng(seed);
        // Partial Fisher-Yates: the first max_pairs slots form the sample.
        for (std::size_t k = 0; k < max_pairs; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
            std::swap(idx[k], idx[pick(rng)]);
        }
        idx.resize(max_pairs);
        std::sort(idx.begin(), idx.end());
        std::vector<std::pair<int, int>> kept;
        kept.reserve(max_pairs);
        for (auto k : idx) kept.push_back(out.pairs[k]);
        out.pairs = std::move(kept);
    }
    out.values.reserve(out.pairs.size());
    for (const auto& [i, j] : out.pairs) out.values.push_back((f.row(i) - f.row(j)).norm());
    return out;
}

namespace {

// The median pooled gap and the two pooled entries (indices into a ++ b)
// that realize it; lo = hi = -1 when the fallback bandwidth is used.
struct MedianGap {
    double median = 1.0;
    long lo = -1;
    long hi = -1;
};

MedianGap median_gap(const std::vector<double>& a, const std::vector<double>& b)
{
    std::vector<std::size_t> order(a.size() + b.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto value = [&](std::size_t i) { return i < a.size() ? a[i] : b[i - a.size()]; };
    // Sorting by value (index as tie-break) makes the result independent of
    // which sample comes first, up to the reported indices.
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const double vx = value(x), vy = value(y);
        return vx != vy ? vx < vy : x < y;
    });
    constexpr std::size_t kMaxPooled = 1024;
    if (order.size() > kMaxPooled) {
        std::vector<std::size_t> thinned;
        const double step = static_cast<double>(order.size()) / kMaxPooled;
        for (std::size_t k = 0; k < kMaxPooled; ++k) thinned.push_back(order[static_cast<std::size_t>(k * step)]);
        order = std::move(thinned);
    }
    struct Gap {
        double v;
        std::size_t i, j;
    };
    std::vector<Gap> gaps;
    gaps.reserve(order.size() * (order.size() - 1) / 2);
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t j = i + 1; j < order.size(); ++j)
            gaps.push_back({value(order[j]) - value(order[i]), i, j});
    MedianGap m;
    if (gaps.empty()) return m;
    auto mid = gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2);
    std::nth_element(gaps.begin(), mid, gaps.end(),
                     [](const Gap& x, const Gap& y) { return x.v != y.v ? x.v < y.v : (x.i != y.i ? x.i < y.i : x.j < y.j); });
    if (!(mid->v > 0)) return m;
    m.median = mid->v;
    m.lo = static_cast<long>(order[mid->i]);
    m.hi = static_cast<long>(order[mid->j]);
    return m;
}

std::vector<double> bandwidths_for(double median) { return {0.5 * median, median, 2.0 * median}; }

}  // namespace

std::vector<double> median_bandwidths(const std::vector<double>& a, const std::vector<double>& b)
{
    return bandwidths_for(median_gap(a, b).median);
}

namespace {

struct KernelSum {
    double value = 0.0;
    std::vector<double> grad_x;  // d/dx_i of the sum
    std::vector<double> grad_y;  // d/dy_j of the sum
};

using Arr = Eigen::ArrayXd;

// Per-bandwidth kernel values and their d2-derivative factors, summed.
// Exponent rates that grow by exactly 4x (bandwidths halving) are obtained
// by squaring twice instead of calling exp again.
class KernelBank {
public:
    explicit KernelBank(std::vector<double> rates) : rates_(std::move(rates))
    {
        std::sort(rates_.begin(), rates_.end());
        ladder_ = true;
        for (std::size_t k = 1; k < rates_.size(); ++k) ladder_ = ladder_ && rates_[k] == 4.0 * rates_[k - 1];
        scale_ = 1.0 / static_cast<double>(rates_.size());
    }

    // kv = mean_s exp(-c_s d2), dk = mean_s c_s exp(-c_s d2)
    void eval(const Arr& d2, Arr& kv, Arr& dk) const
    {
        if (ladder_) {
            Arr e = (-rates_[0] * d2).exp();
            kv = e;
            dk = rates_[0] * e;
            for (std::size_t k = 1; k < rates_.size(); ++k) {
                e = e.square().square();
                kv += e;
                dk += rates_[k] * e;
            }
        } else {
            kv.setZero(d2.size());
            dk.setZero(d2.size());
            for (double c : rates_) {
                const Arr e = (-c * d2).exp();
                kv += e;
                dk += c * e;
            }
        }
        kv *= scale_;
        dk *= scale_;
    }

private:
    std::vector<double> rates_;
    bool ladder_ = false;
    double scale_ = 1.0;
};

// Sum over i, j of k(x_i, y_j) with its gradients.
KernelSum kernel_sum(const std::vector<double>& x, const std::vector<double>& y, const KernelBank& bank)
{
    const Eigen::Map<const Arr> ya(y.data(), static_cast<Eigen::Index>(y.size()));
    KernelSum k;
    k.grad_x.assign(x.size(), 0.0);
    Arr grad_y = Arr::Zero(ya.size());
    Arr diff, kv, dk;
    for (std::size_t i = 0; i < x.size(); ++i) {
        diff = x[i] - ya;
        bank.eval(diff.square(), kv, dk);
        dk *= -2.0 * diff;
        k.value += kv.sum();
        k.grad_x[i] = dk.sum();
        grad_y -= dk;
    }
    k.grad_y.assign(grad_y.data(), grad_y.data() + grad_y.size());
    return k;
}

// Sum over i, j of k(x_i, x_j) and its gradient, using symmetry.
KernelSum kernel_sum_self(const std::vector<double>& x, const KernelBank& bank)
{
    const auto n = static_cast<Eigen::Index>(x.size());
    const Eigen::Map<const Arr> xa(x.data(), n);
    Arr grad = Arr::Zero(n);
    double off = 0.0;
    Arr diff, kv, dk;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        const auto rest = xa.tail(n - i - 1);
        diff = xa(i) - rest;
        bank.eval(diff.square(), kv, dk);
        dk *= -2.0 * diff;
        off += kv.sum();
        // Each unordered pair appears twice in the full sum, once per order.
        grad(i) += 2.0 * dk.sum();
        grad.tail(n - i - 1) -= 2.0 * dk;
    }
    KernelSum k;
    k.value = static_cast<double>(n) + 2.0 * off;  // k(x, x) = 1
    k.grad_x.assign(grad.data(), grad.data() + n);
    return k;
}

}  // namespace

MmdResult mmd(const std::vector<double>& a_in, const std::vector<double>& b_in,
              const std::vector<double>& bandwidths)
{
    if (a_in.empty() || b_in.empty()) throw std::invalid_argument("mmd: empty sample");
    if (bandwidths.empty()) throw std::invalid_argument("mmd: no bandwidths");
    for (double s : bandwidths)
        if (!(s > 0)) throw std::invalid_argument("mmd: bandwidths must be > 0");

    // Evaluate in a canonical argument order so that mmd(a, b) == mmd(b, a)
    // bit for bit.
    const bool swapped = a_in.size() != b_in.size() ? a_in.size() > b_in.size() : b_in < a_in;
    const auto& a = swapped ? b_in : a_in;
    const auto& b = swapped ? a_in : b_in;

    std::vector<double> inv_two_s2;
    for (double s : bandwidths) inv_two_s2.push_back(1.0 / (2.0 * s * s));
    const KernelBank bank(inv_two_s2);
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());

    const KernelSum kaa = kernel_sum_self(a, bank);
    const KernelSum kbb = kernel_sum_self(b, bank);
    const KernelSum kab = kernel_sum(a, b, bank);

    MmdResult r;
    r.value = kaa.value / (n * n) + kbb.value / (m * m) - 2.0 * kab.value / (n * m);
    r.grad_a.resize(a.size());
    r.grad_b.resize(b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        r.grad_a[i] = kaa.grad_x[i] / (n * n) - 2.0 * kab.grad_x[i] / (n * m);
    for (std::size_t j = 0; j < b.size(); ++j)
        r.grad_b[j] = kbb.grad_x[j] / (m * m) - 2.0 * kab.grad_y[j] / (n * m);
    if (swapped) std::swap(r.grad_a, r.grad_b);
    return r;
}

namespace {

void scatter(const SimilaritySample& s, const std::vector<double>& grad_values, const Matrix& f,
             Matrix& grad)
{
    for (std::size_t p = 0; p < s.pairs.size(); ++p) {
        const auto [i, j] = s.pairs[p];
        const auto g = distance_gradient(f.row(i), f.row(j), s.values[p]);
        grad.row(i) += grad_values[p] * g;
        grad.row(j) -= grad_values[p] * g;
    }
}

double align_term(const SimilaritySample& s, const SimilaritySample& t, const Matrix& fs,
                  const Matrix& ft, Matrix& gs, Matrix& gt)
{
    const MedianGap gap = median_gap(s.values, t.values);
    MmdResult r = mmd(s.values, t.values, bandwidths_for(gap.median));
    if (gap.lo >= 0) {
        // The bandwidths scale with the median gap m, and the loss is invariant
        // under scaling samples and m together, so
        // dL/dm = -(sum a_i dL/da_i + sum b_j dL/db_j) / m.
        double moment = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) moment += s.values[i] * r.grad_a[i];
        for (std::size_t j = 0; j < t.size(); ++j) moment += t.values[j] * r.grad_b[j];
        const double dm = -moment / gap.median;
        auto bump = [&](long idx, double v) {
            const auto u = static_cast<std::size_t>(idx);
            if (u < s.size())
                r.grad_a[u] += v;
            else
                r.grad_b[u - s.size()] += v;
        };
        bump(gap.hi, dm);
        bump(gap.lo, -dm);
    }
    scatter(s, r.grad_a, fs, gs);
    scatter(t, r.grad_b, ft, gt);
    return r.value;
}

}  // namespace

AlignmentResult conditional_alignment_loss(const Matrix& fs, const Labels& ls, const Matrix& ft,
                                           const Labels& lt, const AlignmentOptions& opt)
{
    auto take = [&](const Matrix& f, const Labels& l, PairRelation rel, Domain d, std::uint64_t stream) {
        SimilaritySample s;
        try {
            s = pair_similarities(f, l, rel, opt.max_pairs, derive_seed(opt.seed, stream), d);
        } catch (const std::invalid_argument&) {
        }
        if (s.values.empty())
            throw std::invalid_argument(std::string("conditional alignment: empty ") +
                                        (rel == PairRelation::Positive ? "positive" : "negative") +
                                        " " + to_string(d) + " similarity sample");
        return s;
    };
    const auto sp = take(fs, ls, PairRelation::Positive, Domain::Source, 1);
    const auto tp = take(ft, lt, PairRelation::Positive, Domain::Target, 2);
    const auto sn = take(fs, ls, PairRelation::Negative, Domain::Source, 3);
    const auto tn = take(ft, lt, PairRelation::Negative, Domain::Target, 4);

    AlignmentResult r;
    r.grad_source = Matrix::Zero(fs.rows(), fs.cols());
    r.grad_target = Matrix::Zero(ft.rows(), ft.cols());
    r.positive_term = align_term(sp, tp, fs, ft, r.grad_source, r.grad_target);
    r.negative_term = align_term(sn, tn, fs, ft, r.grad_source, r.grad_target);
    r.loss = r.positive_term + r.negative_term;
    return r;
}

AlignmentResult marginal_alignment_loss(const Matrix& fs, const Matrix& ft, const AlignmentOptions& opt)
{
    const auto s = pair_similarities(fs, {}, PairRelation::All, opt.max_pairs, derive_seed(opt.seed, 5),
                                     Domain::Source);
    const auto t = pair_similarities(ft, {}, PairRelation::All, opt.max_pairs, derive_seed(opt.seed, 6),
                                     Domain::Target);
    if (s.values.empty() || t.values.empty())
        throw std::invalid_argument("marginal alignment: empty similarity sample");
    AlignmentResult r;
    r.grad_source = Matrix::Zero(fs.rows(), fs.cols());
    r.grad_target = Matrix::Zero(ft.rows(), ft.cols());
    r.loss = align_term(s, t, fs, ft, r.grad_source, r.grad_target);
    return r;
}

}  // namespace hypass
