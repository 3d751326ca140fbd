#pragma once

// Learnable affine correction of a shifted target domain, trained only
// through the conditional similarity-alignment loss.

#include "hypass/alignment.hpp"
#include "hypass/synth_data.hpp"

#include <algorithm>
#include <vector>

namespace hypass::testing {

struct ShiftToyResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double best_loss = 0.0;
    int steps = 0;
};

// Source features are the normalized source points; target features are
// normalize(x A^T + b) with A = I, b = 0 at the start. Plain gradient descent
// on (A, b). With stop_ratio > 0, stops once the loss falls below
// stop_ratio * initial.
inline ShiftToyResult run_shift_toy(std::uint64_t seed, int steps, double lr, int n_ids = 8,
                                    int per_id = 6, double stop_ratio = 0.0)
{
    const auto gp = preset("standard", seed);
    const auto pair =
        generate_domain_pair(seed, n_ids, n_ids, per_id, gp.dim, gp.shift);
    const Matrix fs = normalize_rows(pair.source.points);
    const Matrix& xt = pair.target.points;
    const Labels& ls = pair.source.identity_labels;
    const Labels& lt = pair.target.identity_labels;
    const auto d = xt.cols();

    Matrix a = Matrix::Identity(d, d);
    Vector b = Vector::Zero(d);
    AlignmentOptions opt;
    opt.seed = seed;

    auto eval = [&](bool with_grad, Matrix* ga, Vector* gb) {
        Matrix raw = xt * a.transpose();
        raw.rowwise() += b.transpose();
        const Matrix ft = normalize_rows(raw);
        const auto r = conditional_alignment_loss(fs, ls, ft, lt, opt);
        if (with_grad) {
            // Backprop through row normalization, then the affine map.
            Matrix graw(ft.rows(), ft.cols());
            for (Eigen::Index i = 0; i < ft.rows(); ++i) {
                const double n = raw.row(i).norm();
                const auto g = r.grad_target.row(i);
                graw.row(i) = (g - ft.row(i) * ft.row(i).dot(g)) / n;
            }
            *ga = graw.transpose() * xt;
            *gb = graw.colwise().sum().transpose();
        }
        return r.loss;
    };

    ShiftToyResult res;
    Matrix ga;
    Vector gb;
    for (int s = 0; s < steps; ++s) {
        const double loss = eval(true, &ga, &gb);
        if (s == 0) res.initial_loss = res.best_loss = loss;
        res.best_loss = std::min(res.best_loss, loss);
        if (stop_ratio > 0 && loss < stop_ratio * res.initial_loss) {
            res.final_loss = loss;
            return res;
        }
        a -= lr * ga;
        b -= lr * gb;
        ++res.steps;
    }
    res.final_loss = eval(false, nullptr, nullptr);
    if (steps == 0) res.initial_loss = res.best_loss = res.final_loss;
    res.best_loss = std::min(res.best_loss, res.final_loss);
    return res;
}

}  // namespace hypass::testing
