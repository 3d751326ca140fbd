#pragma once

#include "hypass/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>

namespace hypass {

// Two-layer perceptron x -> tanh(W1 x + b1) -> W2 h + b2 -> unit normalization.
// The same struct doubles as the gradient container.
struct Encoder {
    Matrix w1;  // hidden x input
    Vector b1;
    Matrix w2;  // feature x hidden
    Vector b2;

    static Encoder random(int input_dim, int hidden_dim, int feature_dim, std::uint64_t seed);
    static Encoder zeros_like(const Encoder& e);

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    int feature_dim() const { return static_cast<int>(w2.rows()); }
    bool finite() const;
};

struct EncoderCache {
    Matrix input;
    Matrix hidden;    // tanh activations
    Matrix raw;       // pre-normalization outputs
    Vector norms;     // row norms of raw
    Matrix features;  // unit-normalized outputs
};

EncoderCache forward(const Encoder& enc, const Matrix& points);

// Unit-normalized features, one row per input row.
Matrix encode(const Encoder& enc, const Matrix& points);

// Backpropagates d(loss)/d(features) to the parameters.
Encoder backward(const Encoder& enc, const EncoderCache& cache, const Matrix& grad_features);

// Linear classifier over encoder features.
struct ClassifierHead {
    Matrix w;  // classes x feature
    Vector b;

    static ClassifierHead random(int feature_dim, int n_classes, std::uint64_t seed);
    static ClassifierHead zeros_like(const ClassifierHead& h);
    int n_classes() const { return static_cast<int>(w.rows()); }
};

struct CrossEntropyResult {
    double loss = 0.0;
    ClassifierHead grad_head;
    Matrix grad_features;
};

// Mean softmax cross-entropy of head(features) against labels in [0, C).
CrossEntropyResult cross_entropy_loss(const ClassifierHead& head, const Matrix& features,
                                      const Labels& labels);

struct TripletResult {
    double loss = 0.0;
    Matrix grad_features;
};

// Batch-hard triplet loss: per anchor, hinge on (hardest positive distance -
// hardest negative distance + margin), averaged over anchors.
TripletResult batch_hard_triplet_loss(const Matrix& features, const Labels& labels, double margin);

// Gradient of ||a - b|| with respect to a; zero at coincident points.
template <typename DerivedA, typename DerivedB>
auto distance_gradient(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                       typename DerivedA::Scalar dist)
{
    using Scalar = typename DerivedA::Scalar;
    using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
    if (dist <= Scalar(0)) return Row(Row::Zero(a.size()));
    return Row((a - b) / dist);
}

// P identities x K instances per batch; identities with fewer than K samples
// are sampled with replacement.
class PKBatchSampler {
public:
    PKBatchSampler(const Labels& labels, int p, int k, std::uint64_t seed);

    std::vector<std::size_t> next_batch();
    int p() const { return p_; }
    int k() const { return k_; }

private:
    std::vector<std::vector<std::size_t>> groups_;
    int p_;
    int k_;
    std::mt19937_64 rng_;
};

// SGD with momentum and L2 weight decay; state keyed by parameter shape.
struct SgdConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
};

template <typename Param>
void sgd_update(Param& param, const Param& grad, Param& velocity, const SgdConfig& cfg)
{
    velocity = cfg.momentum * velocity - cfg.learning_rate * (grad + cfg.weight_decay * param);
    param += velocity;
}

void sgd_step(Encoder& enc, const Encoder& grad, Encoder& velocity, const SgdConfig& cfg);
void sgd_step(ClassifierHead& head, const ClassifierHead& grad, ClassifierHead& velocity,
              const SgdConfig& cfg);

// Parameter flattening, in w1, b1, w2, b2 order.
Vector flatten(const Encoder& e);
void unflatten(Encoder& e, const Vector& v);
Vector flatten(const ClassifierHead& h);
void unflatten(ClassifierHead& h, const Vector& v);

// Text checkpoint: a "hypass-checkpoint 1" line, then per tensor a line
// "tensor <name> <rows> <cols>" followed by one line of row-major values in
// shortest round-trip decimal form.
void save_checkpoint(std::ostream& os, const Encoder& enc);
void save_checkpoint(const std::string& path, const Encoder& enc);
Encoder load_checkpoint(std::istream& is);
Encoder load_checkpoint(const std::string& path);

}  // namespace hypass
