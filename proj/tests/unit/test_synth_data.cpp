#include "hypass/alignment.hpp"
#include "hypass/io.hpp"
#include "hypass/synth_data.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace hypass;

namespace {

bool same(const DomainDataset& a, const DomainDataset& b)
{
    return a.points == b.points && a.identity_labels == b.identity_labels && a.domain == b.domain;
}

void every_identity_has_two(const DomainDataset& ds)
{
    std::map<int, int> c;
    for (int id : ds.identity_labels) ++c[id];
    for (const auto& kv : c) CHECK(kv.second >= 2);
}

}  // namespace

TEST_CASE("generation is deterministic per seed")
{
    const auto a = generate_domain_pair(preset("standard", 7));
    const auto b = generate_domain_pair(preset("standard", 7));
    const auto c = generate_domain_pair(preset("standard", 8));
    CHECK(same(a.source, b.source));
    CHECK(same(a.target, b.target));
    CHECK(!same(a.source, c.source));
}

TEST_CASE("dataset shapes and identity namespaces")
{
    const auto p = generate_domain_pair(3, 5, 4, 6, 7, ShiftSpec{});
    CHECK(p.source.points.rows() == 30);
    CHECK(p.source.points.cols() == 7);
    CHECK(p.target.size() == 24);
    CHECK(p.source.domain == Domain::Source);
    CHECK(p.target.domain == Domain::Target);
    const std::set<int> s(p.source.identity_labels.begin(), p.source.identity_labels.end());
    const std::set<int> t(p.target.identity_labels.begin(), p.target.identity_labels.end());
    CHECK(s.size() == 5);
    CHECK(t.size() == 4);
    for (int id : t) CHECK(!s.count(id));
    every_identity_has_two(p.source);
    every_identity_has_two(p.target);
}

TEST_CASE("target identity means follow the shifted regenerated centers")
{
    auto gp = preset("standard", 1);
    gp.n_ids_source = gp.n_ids_target = 10;
    gp.samples_per_id = 8;
    // A tiny target spread makes the per-identity mean pin down the center.
    gp.shift.noise_sigma_target = 1e-4;
    const auto pair = generate_domain_pair(gp);

    std::mt19937_64 rng(derive_seed(gp.seed, 0));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix centers(20, gp.dim);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < gp.dim; ++j) centers(i, j) = u(rng);

    const double c = std::cos(gp.shift.rotation_angle), s = std::sin(gp.shift.rotation_angle);
    for (int id = 0; id < 10; ++id) {
        Vector raw = centers.row(10 + id).transpose();
        Vector expect = raw;
        expect(0) = c * raw(0) - s * raw(1);
        expect(1) = s * raw(0) + c * raw(1);
        expect = expect * gp.shift.scale + gp.shift.translation;
        Vector mean = Vector::Zero(gp.dim);
        for (std::size_t i = 0; i < pair.target.size(); ++i)
            if (pair.target.identity_labels[i] == 10 + id) mean += pair.target.points.row(static_cast<Eigen::Index>(i)).transpose();
        mean /= 8.0;
        CHECK((mean - expect).norm() < 1e-3);
    }
}

TEST_CASE("zero shift gives the same law")
{
    CHECK(preset("zero-shift", 1).shift.is_identity());
    CHECK(!preset("standard", 1).shift.is_identity());

    // Permutation test on the similarity-MMD statistic between the clouds.
    auto gp = preset("zero-shift", 5);
    gp.n_ids_source = gp.n_ids_target = 6;
    const auto pair = generate_domain_pair(gp);
    const auto stat = [](const Matrix& a, const Matrix& b) { return marginal_alignment_loss(a, b).loss; };
    const double observed = stat(pair.source.points, pair.target.points);

    Matrix pooled(pair.source.points.rows() + pair.target.points.rows(), gp.dim);
    pooled << pair.source.points, pair.target.points;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pooled.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(17);
    std::vector<double> null;
    const Eigen::Index ns = pair.source.points.rows();
    for (int r = 0; r < 99; ++r) {
        std::shuffle(idx.begin(), idx.end(), rng);
        Matrix a(ns, gp.dim), b(pooled.rows() - ns, gp.dim);
        for (Eigen::Index i = 0; i < pooled.rows(); ++i)
            (i < ns ? a.row(i) : b.row(i - ns)) = pooled.row(idx[static_cast<std::size_t>(i)]);
        null.push_back(stat(a, b));
    }
    std::sort(null.begin(), null.end());
    CHECK(observed < null[94]);
}

TEST_CASE("generation argument errors")
{
    CHECK_THROWS_AS(generate_domain_pair(1, 1, 4, 4, 4, ShiftSpec{}), std::invalid_argument);
    CHECK_THROWS_AS(generate_domain_pair(1, 4, 4, 1, 4, ShiftSpec{}), std::invalid_argument);
    CHECK_THROWS_AS(generate_domain_pair(1, 4, 4, 4, 1, ShiftSpec{}), std::invalid_argument);
    ShiftSpec bad;
    bad.scale = 0;
    CHECK_THROWS_AS(generate_domain_pair(1, 4, 4, 4, 4, bad), std::invalid_argument);
    CHECK_THROWS_AS(preset("nope", 1), std::invalid_argument);
}

TEST_CASE("split_validation examples")
{
    const auto p = generate_domain_pair(2, 10, 3, 8, 4, ShiftSpec{});
    const auto s = split_validation(p.source, 20, 9);
    CHECK(s.train.size() == 60);
    CHECK(s.val.size() == 20);
    std::set<std::size_t> tr(s.train.origin.begin(), s.train.origin.end());
    for (auto o : s.val.origin) CHECK(!tr.count(o));
    every_identity_has_two(s.train);
    every_identity_has_two(s.val);

    const auto again = split_validation(p.source, 20, 9);
    CHECK(same(again.val, s.val));
    CHECK(again.val.origin == s.val.origin);

    const auto two = generate_domain_pair(2, 2, 2, 8, 4, ShiftSpec{});
    CHECK_THROWS_AS(split_validation(two.source, 14, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_validation(two.source, 16, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_validation(two.source, 1, 1), std::invalid_argument);
}

TEST_CASE("split keeps two samples per identity for awkward sizes")
{
    const auto p = generate_domain_pair(4, 12, 3, 5, 4, ShiftSpec{});
    for (std::size_t n_val = 4; n_val <= 40; ++n_val) {
        const auto s = split_validation(p.source, n_val, n_val);
        CHECK(s.val.size() == n_val);
        CHECK(s.train.size() + n_val == p.source.size());
        every_identity_has_two(s.train);
        every_identity_has_two(s.val);
    }
}

TEST_CASE("csv round trip is exact")
{
    const auto p = generate_domain_pair(preset("standard", 3));
    std::stringstream ss;
    write_csv(ss, p.target);
    const auto back = read_csv(ss);
    CHECK(same(back, p.target));
}

TEST_CASE("csv errors")
{
    auto read = [](const std::string& s) {
        std::istringstream is(s);
        return read_csv(is);
    };
    CHECK_THROWS_AS(read(""), DataError);
    CHECK_THROWS_AS(read("label,domain,x_0\n"), DataError);
    CHECK_THROWS_AS(read("id,domain,x_1\n"), DataError);
    CHECK_THROWS_AS(read("id,domain,x_0\n1,source\n"), DataError);
    CHECK_THROWS_AS(read("id,domain,x_0\n1,source,abc\n"), DataError);
    CHECK_THROWS_AS(read("id,domain,x_0\n1,source,1\n2,target,1\n"), DataError);
    CHECK_THROWS_AS(read("id,domain,x_0\n1,elsewhere,1\n"), DataError);
    CHECK(read("id,domain,x_0\n1,target,0.5\n\n").size() == 1);
}
