#include "hypass/encoder.hpp"
#include "hypass/hypass_loop.hpp"
#include "hypass/io.hpp"
#include "hypass/synth_data.hpp"

#include "../support/fd.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace hypass;
using hypass::testing::fd_relative_error;
using hypass::testing::flat;
using hypass::testing::unflat;
using hypass::testing::kink_distance;

namespace {

Matrix gaussian_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double sd = 1.0)
{
    std::normal_distribution<double> g(0.0, sd);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

Matrix unit_rows(Matrix m)
{
    m.rowwise().normalize();
    return m;
}

bool same_bits(const Encoder& a, const Encoder& b)
{
    const Vector x = flatten(a), y = flatten(b);
    return x.size() == y.size() && std::equal(x.data(), x.data() + x.size(), y.data());
}

}  // namespace

TEST_CASE("encode normalizes rows")
{
    std::mt19937_64 rng(1);
    const Encoder enc = Encoder::random(5, 16, 4, 3);
    CHECK(enc.finite());
    const Matrix f = encode(enc, gaussian_matrix(rng, 40, 5, 3.0));
    for (Eigen::Index i = 0; i < f.rows(); ++i) CHECK(std::abs(f.row(i).norm() - 1.0) <= 1e-6);
    CHECK_THROWS_AS(encode(enc, Matrix::Zero(3, 4)), std::invalid_argument);
    CHECK_THROWS_AS(Encoder::random(0, 4, 4, 1), std::invalid_argument);
}

TEST_CASE("zero weights give the normalized bias for every input")
{
    Encoder enc = Encoder::random(3, 8, 2, 1);
    enc.w1.setZero();
    enc.w2.setZero();
    enc.b2 << 3.0, 4.0;
    std::mt19937_64 rng(2);
    const Matrix f = encode(enc, gaussian_matrix(rng, 6, 3));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        CHECK(f(i, 0) == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(f(i, 1) == doctest::Approx(0.8).epsilon(1e-15));
    }
}

TEST_CASE("encode: duplicate rows and row permutations")
{
    std::mt19937_64 rng(3);
    const Encoder enc = Encoder::random(4, 12, 3, 5);
    Matrix x = gaussian_matrix(rng, 10, 4);
    x.row(7) = x.row(2);
    const Matrix f = encode(enc, x);
    CHECK(f.row(7) == f.row(2));

    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Matrix fp = encode(enc, select_rows(x, perm));
    for (std::size_t i = 0; i < perm.size(); ++i)
        CHECK((fp.row(static_cast<Eigen::Index>(i)) - f.row(static_cast<Eigen::Index>(perm[i]))).norm() <= 1e-15);

    // Encoding blocks separately gives the same rows as one pass, up to
    // the product kernel's summation order.
    const Matrix top = encode(enc, x.topRows(4)), bottom = encode(enc, x.bottomRows(6));
    CHECK((top - f.topRows(4)).norm() <= 1e-15);
    CHECK((bottom - f.bottomRows(6)).norm() <= 1e-15);
}

TEST_CASE("cross entropy values")
{
    const int c = 5;
    ClassifierHead head = ClassifierHead::random(3, c, 1);
    head.w.setZero();
    head.b.setZero();
    std::mt19937_64 rng(4);
    const Matrix f = unit_rows(gaussian_matrix(rng, 7, 3));
    const auto r = cross_entropy_loss(head, f, {0, 1, 2, 3, 4, 0, 1});
    CHECK(r.loss == doctest::Approx(std::log(5.0)).epsilon(1e-14));

    // One-hot perfect logits, scaled large.
    ClassifierHead id = ClassifierHead::random(3, 3, 1);
    id.w = 60.0 * Matrix::Identity(3, 3);
    id.b.setZero();
    const auto p = cross_entropy_loss(id, Matrix::Identity(3, 3), {0, 1, 2});
    CHECK(p.loss < 1e-20);

    CHECK_THROWS_AS(cross_entropy_loss(head, f, {0, 1, 2, 3, 5, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(cross_entropy_loss(head, f, {0, 1, 2, 3, -1, 0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(cross_entropy_loss(head, f, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(ClassifierHead::random(3, 0, 1), std::invalid_argument);
}

TEST_CASE("cross entropy gradients match finite differences")
{
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const ClassifierHead head = ClassifierHead::random(3, 4, static_cast<std::uint64_t>(trial + 10));
        const Matrix f = gaussian_matrix(rng, 5, 3);
        const Labels y{0, 3, 1, 1, 2};
        const auto r = cross_entropy_loss(head, f, y);

        const double ef = fd_relative_error(
            [&](const Vector& v) { return cross_entropy_loss(head, unflat(v, 5, 3), y).loss; }, flat(f),
            flat(r.grad_features));
        CHECK(ef < 1e-4);
        const double eh = fd_relative_error(
            [&](const Vector& v) {
                ClassifierHead h = head;
                unflatten(h, v);
                return cross_entropy_loss(h, f, y).loss;
            },
            flatten(head), flatten(r.grad_head));
        CHECK(eh < 1e-4);
    }
}

TEST_CASE("triplet loss values")
{
    // Two tight clusters far apart: hinge inactive.
    Matrix f(4, 2);
    f << 1, 0, 0.99, 0.01, -1, 0, -0.99, -0.01;
    CHECK(batch_hard_triplet_loss(f, {0, 0, 1, 1}, 0.3).loss == 0.0);
    CHECK(batch_hard_triplet_loss(f, {0, 0, 1, 1}, 0.3).grad_features.norm() == 0.0);

    // Identical features: d_pos = d_neg = 0.
    const auto same = batch_hard_triplet_loss(Matrix::Ones(6, 3), {0, 0, 1, 1, 2, 2}, 0.3);
    CHECK(same.loss == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(same.grad_features.norm() == 0.0);

    CHECK_THROWS_AS(batch_hard_triplet_loss(f, {0, 0, 1, 2}, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(batch_hard_triplet_loss(f, {0, 0, 1}, 0.3), std::invalid_argument);
}

TEST_CASE("triplet gradients match finite differences away from kinks")
{
    std::mt19937_64 rng(6);
    const Labels y{0, 0, 1, 1, 2, 2, 3, 3};
    int checked = 0;
    for (int trial = 0; trial < 40 && checked < 5; ++trial) {
        const Matrix f = gaussian_matrix(rng, 8, 4, 0.5);
        if (kink_distance(f, y, 0.3) < 1e-3) continue;
        const auto r = batch_hard_triplet_loss(f, y, 0.3);
        CHECK(r.loss > 0.0);
        const double e = fd_relative_error(
            [&](const Vector& v) { return batch_hard_triplet_loss(unflat(v, 8, 4), y, 0.3).loss; }, flat(f),
            flat(r.grad_features));
        CHECK(e < 1e-4);
        ++checked;
    }
    CHECK(checked == 5);
}

TEST_CASE("backward through the encoder matches finite differences")
{
    std::mt19937_64 rng(7);
    const Encoder enc = Encoder::random(3, 6, 4, 8);
    const Matrix x = gaussian_matrix(rng, 5, 3);
    const Matrix upstream = gaussian_matrix(rng, 5, 4);
    // Linear probe <upstream, encode(x)>.
    auto probe = [&](const Encoder& e) { return (encode(e, x).array() * upstream.array()).sum(); };
    const Encoder g = backward(enc, forward(enc, x), upstream);
    const double err = fd_relative_error(
        [&](const Vector& v) {
            Encoder e = enc;
            unflatten(e, v);
            return probe(e);
        },
        flatten(enc), flatten(g));
    CHECK(err < 1e-4);
}

TEST_CASE("composed total loss gradient matches finite differences")
{
    std::mt19937_64 rng(9);
    const Encoder enc = Encoder::random(4, 10, 3, 11);
    const ClassifierHead hs = ClassifierHead::random(3, 3, 12);
    const ClassifierHead ht = ClassifierHead::random(3, 2, 13);
    StepBatch b;
    b.source_points = gaussian_matrix(rng, 6, 4);
    b.source_labels = {0, 0, 1, 1, 2, 2};
    b.target_points = gaussian_matrix(rng, 6, 4);
    b.target_labels = {0, 0, 0, 1, 1, 1};
    const AlignmentOptions align{0, 17};

    int checked = 0;
    for (const LossSwitches sw : {LossSwitches{true, true, true}, LossSwitches{true, false, false},
                                  LossSwitches{false, true, true}}) {
        const TotalLoss l = total_loss(enc, hs, ht, b, sw, 0.3, align);
        CHECK(l.total == l.source_id + l.target_id + l.align);
        CHECK(std::isfinite(l.total));
        auto loss_at = [&](const Encoder& e, const ClassifierHead& s, const ClassifierHead& t) {
            return total_loss(e, s, t, b, sw, 0.3, align).total;
        };
        // Skip draws that land on a triplet kink.
        const Matrix fs = encode(enc, b.source_points), ft = encode(enc, b.target_points);
        if (kink_distance(fs, b.source_labels, 0.3) < 1e-3 || kink_distance(ft, b.target_labels, 0.3) < 1e-3) continue;
        CHECK(fd_relative_error(
                  [&](const Vector& v) {
                      Encoder e = enc;
                      unflatten(e, v);
                      return loss_at(e, hs, ht);
                  },
                  flatten(enc), flatten(l.grad_encoder)) < 1e-4);
        CHECK(fd_relative_error(
                  [&](const Vector& v) {
                      ClassifierHead h = hs;
                      unflatten(h, v);
                      return loss_at(enc, h, ht);
                  },
                  flatten(hs), flatten(l.grad_source_head)) < 1e-4);
        CHECK(fd_relative_error(
                  [&](const Vector& v) {
                      ClassifierHead h = ht;
                      unflatten(h, v);
                      return loss_at(enc, hs, h);
                  },
                  flatten(ht), flatten(l.grad_target_head)) < 1e-4);
        ++checked;
    }
    CHECK(checked == 3);
}

TEST_CASE("pk sampler")
{
    SUBCASE("the unique full batch")
    {
        PKBatchSampler s({0, 1, 0, 1}, 2, 2, 1);
        auto b = s.next_batch();
        std::sort(b.begin(), b.end());
        CHECK(b == std::vector<std::size_t>{0, 1, 2, 3});
    }
    SUBCASE("replacement for a single-sample identity")
    {
        PKBatchSampler s({0, 1, 1, 1, 1}, 2, 4, 3);
        const auto b = s.next_batch();
        CHECK(std::count(b.begin(), b.end(), std::size_t{0}) == 4);
    }
    SUBCASE("P distinct labels times K, deterministic per seed")
    {
        Labels y;
        for (int i = 0; i < 60; ++i) y.push_back(i % 7);
        PKBatchSampler a(y, 4, 3, 9), b(y, 4, 3, 9), c(y, 4, 3, 10);
        bool differs = false;
        for (int t = 0; t < 20; ++t) {
            const auto ba = a.next_batch();
            CHECK(ba == b.next_batch());
            differs = differs || ba != c.next_batch();
            REQUIRE(ba.size() == 12);
            std::map<int, int> count;
            for (auto i : ba) ++count[y[i]];
            CHECK(count.size() == 4);
            for (const auto& kv : count) CHECK(kv.second == 3);
        }
        CHECK(differs);
    }
    CHECK_THROWS_AS(PKBatchSampler({0, 0, 1}, 3, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(PKBatchSampler({0, 1}, 0, 2, 1), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is exact")
{
    Encoder enc = Encoder::random(7, 5, 3, 21);
    enc.w1(0, 0) = 0.1 + 0.2;  // not a short decimal
    enc.b2(1) = -1e-300;
    std::stringstream ss;
    save_checkpoint(ss, enc);
    const Encoder back = load_checkpoint(ss);
    CHECK(same_bits(enc, back));
    CHECK(back.input_dim() == 7);
    CHECK(back.hidden_dim() == 5);
    CHECK(back.feature_dim() == 3);

    std::istringstream bad("not a checkpoint\n");
    CHECK_THROWS_AS(load_checkpoint(bad), DataError);
    std::ostringstream os;
    save_checkpoint(os, enc);
    std::string text = os.str();
    text.resize(text.size() / 2);
    std::istringstream truncated(text);
    CHECK_THROWS_AS(load_checkpoint(truncated), DataError);
}

TEST_CASE("sgd with learning rate 0 leaves parameters bit-identical")
{
    Encoder enc = Encoder::random(3, 4, 2, 1);
    const Encoder before = enc;
    Encoder vel = Encoder::zeros_like(enc);
    Encoder grad = Encoder::random(3, 4, 2, 2);
    SgdConfig cfg;
    cfg.learning_rate = 0.0;
    for (int i = 0; i < 5; ++i) sgd_step(enc, grad, vel, cfg);
    CHECK(same_bits(enc, before));

    // One full epoch of the loop at learning rate 0.
    ExperimentConfig ec;
    ec.data = preset("standard", 3);
    ec.data.n_ids_source = 12;
    ec.data.n_ids_target = 8;
    ec.n_val = 12;
    const PreparedData d = prepare_data(ec);
    LoopConfig lc;
    lc.init_epochs = 1;
    lc.n_epochs = 1;
    lc.batches_per_epoch = 2;
    lc.search_budget = 5;
    lc.sgd.learning_rate = 0.0;
    const RunOutput trained = run(d.source_train, d.source_val, d.target, lc);
    lc.init_epochs = 0;
    lc.n_epochs = 0;
    const RunOutput fresh = run(d.source_train, d.source_val, d.target, lc);
    CHECK(same_bits(trained.encoder, fresh.encoder));
}
