#include "hypass/encoder.hpp"

#include "hypass/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hypass {

namespace {

constexpr double kMinNorm = 1e-12;

void fill_normal(Matrix& m, double stddev, std::mt19937_64& rng)
{
    std::normal_distribution<double> n(0.0, stddev);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = n(rng);
}

}  // namespace

Encoder Encoder::random(int input_dim, int hidden_dim, int feature_dim, std::uint64_t seed)
{
    if (input_dim < 1 || hidden_dim < 1 || feature_dim < 1)
        throw std::invalid_argument("encoder: dimensions must be >= 1");
    std::mt19937_64 rng(seed);
    Encoder e;
    e.w1.resize(hidden_dim, input_dim);
    e.w2.resize(feature_dim, hidden_dim);
    fill_normal(e.w1, std::sqrt(1.0 / input_dim), rng);
    fill_normal(e.w2, std::sqrt(1.0 / hidden_dim), rng);
    e.b1 = Vector::Zero(hidden_dim);
    e.b2 = Vector::Zero(feature_dim);
    return e;
}

Encoder Encoder::zeros_like(const Encoder& e)
{
    Encoder z;
    z.w1 = Matrix::Zero(e.w1.rows(), e.w1.cols());
    z.b1 = Vector::Zero(e.b1.size());
    z.w2 = Matrix::Zero(e.w2.rows(), e.w2.cols());
    z.b2 = Vector::Zero(e.b2.size());
    return z;
}

bool Encoder::finite() const
{
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

EncoderCache forward(const Encoder& enc, const Matrix& points)
{
    if (points.cols() != enc.input_dim()) throw std::invalid_argument("encoder: input dimension mismatch");
    EncoderCache c;
    c.input = points;
    c.hidden = ((points * enc.w1.transpose()).rowwise() + enc.b1.transpose()).array().tanh();
    c.raw = (c.hidden * enc.w2.transpose()).rowwise() + enc.b2.transpose();
    c.norms = c.raw.rowwise().norm();
    c.features = c.raw;
    for (Eigen::Index i = 0; i < c.features.rows(); ++i)
        c.features.row(i) /= std::max(c.norms(i), kMinNorm);
    return c;
}

Matrix encode(const Encoder& enc, const Matrix& points) { return forward(enc, points).features; }

Encoder backward(const Encoder& enc, const EncoderCache& c, const Matrix& grad_features)
{
    // Through the normalization: d raw = (g - f (f . g)) / ||raw||.
    Matrix d_raw(grad_features.rows(), grad_features.cols());
    for (Eigen::Index i = 0; i < d_raw.rows(); ++i) {
        const double n = std::max(c.norms(i), kMinNorm);
        const double proj = c.features.row(i).dot(grad_features.row(i));
        d_raw.row(i) = (grad_features.row(i) - proj * c.features.row(i)) / n;
    }
    Encoder g;
    g.w2 = d_raw.transpose() * c.hidden;
    g.b2 = d_raw.colwise().sum().transpose();
    const Matrix d_pre = ((d_raw * enc.w2).array() * (1.0 - c.hidden.array().square())).matrix();
    g.w1 = d_pre.transpose() * c.input;
    g.b1 = d_pre.colwise().sum().transpose();
    return g;
}

ClassifierHead ClassifierHead::random(int feature_dim, int n_classes, std::uint64_t seed)
{
    if (n_classes < 1) throw std::invalid_argument("classifier head: n_classes must be >= 1");
    std::mt19937_64 rng(seed);
    ClassifierHead h;
    h.w.resize(n_classes, feature_dim);
    fill_normal(h.w, 0.01, rng);
    h.b = Vector::Zero(n_classes);
    return h;
}

ClassifierHead ClassifierHead::zeros_like(const ClassifierHead& h)
{
    ClassifierHead z;
    z.w = Matrix::Zero(h.w.rows(), h.w.cols());
    z.b = Vector::Zero(h.b.size());
    return z;
}

CrossEntropyResult cross_entropy_loss(const ClassifierHead& head, const Matrix& features,
                                      const Labels& labels)
{
    const Eigen::Index n = features.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("cross_entropy: features/labels length mismatch");
    if (n == 0) throw std::invalid_argument("cross_entropy: empty batch");
    for (int y : labels)
        if (y < 0 || y >= head.n_classes())
            throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range");

    Matrix logits = (features * head.w.transpose()).rowwise() + head.b.transpose();
    CrossEntropyResult r;
    Matrix d_logits(n, head.n_classes());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = logits.row(i).maxCoeff();
        const auto e = (logits.row(i).array() - m).exp();
        const double z = e.sum();
        const int y = labels[static_cast<std::size_t>(i)];
        r.loss += -(logits(i, y) - m - std::log(z));
        d_logits.row(i) = e / z;
        d_logits(i, y) -= 1.0;
    }
    r.loss /= static_cast<double>(n);
    d_logits /= static_cast<double>(n);
    r.grad_head.w = d_logits.transpose() * features;
    r.grad_head.b = d_logits.colwise().sum().transpose();
    r.grad_features = d_logits * head.w;
    return r;
}

TripletResult batch_hard_triplet_loss(const Matrix& f, const Labels& labels, double margin)
{
    const Eigen::Index n = f.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("triplet: features/labels length mismatch");
    std::map<int, int> counts;
    for (int y : labels) ++counts[y];
    for (const auto& [y, c] : counts)
        if (c < 2) throw std::invalid_argument("triplet: label " + std::to_string(y) + " has a single instance");

    const Matrix d = pairwise_distances(f);
    TripletResult r;
    r.grad_features = Matrix::Zero(n, f.cols());
    for (Eigen::Index a = 0; a < n; ++a) {
        Eigen::Index pos = -1, neg = -1;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == a) continue;
            if (labels[a] == labels[j]) {
                if (pos < 0 || d(a, j) > d(a, pos)) pos = j;
            } else if (neg < 0 || d(a, j) < d(a, neg)) {
                neg = j;
            }
        }
        if (neg < 0) continue;  // single-label batch: no negatives to mine
        const double hinge = d(a, pos) - d(a, neg) + margin;
        if (hinge <= 0) continue;
        r.loss += hinge;
        const auto gp = distance_gradient(f.row(a), f.row(pos), d(a, pos));
        const auto gn = distance_gradient(f.row(a), f.row(neg), d(a, neg));
        r.grad_features.row(a) += gp - gn;
        r.grad_features.row(pos) -= gp;
        r.grad_features.row(neg) += gn;
    }
    r.loss /= static_cast<double>(n);
    r.grad_features /= static_cast<double>(n);
    return r;
}

PKBatchSampler::PKBatchSampler(const Labels& labels, int p, int k, std::uint64_t seed)
    : p_(p), k_(k), rng_(seed)
{
    if (p < 1 || k < 1) throw std::invalid_argument("pk sampler: P and K must be >= 1");
    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
    if (static_cast<int>(by_label.size()) < p)
        throw std::invalid_argument("pk sampler: fewer than P distinct labels");
    for (auto& kv : by_label) groups_.push_back(std::move(kv.second));
}

std::vector<std::size_t> PKBatchSampler::next_batch()
{
    std::vector<std::size_t> order(groups_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<std::size_t> batch;
    batch.reserve(static_cast<std::size_t>(p_ * k_));
    for (int g = 0; g < p_; ++g) {
        auto members = groups_[order[static_cast<std::size_t>(g)]];
        if (static_cast<int>(members.size()) >= k_) {
            std::shuffle(members.begin(), members.end(), rng_);
            batch.insert(batch.end(), members.begin(), members.begin() + k_);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
            for (int j = 0; j < k_; ++j) batch.push_back(members[pick(rng_)]);
        }
    }
    return batch;
}

void sgd_step(Encoder& enc, const Encoder& grad, Encoder& velocity, const SgdConfig& cfg)
{
    sgd_update(enc.w1, grad.w1, velocity.w1, cfg);
    sgd_update(enc.b1, grad.b1, velocity.b1, cfg);
    sgd_update(enc.w2, grad.w2, velocity.w2, cfg);
    sgd_update(enc.b2, grad.b2, velocity.b2, cfg);
}

void sgd_step(ClassifierHead& head, const ClassifierHead& grad, ClassifierHead& velocity,
              const SgdConfig& cfg)
{
    sgd_update(head.w, grad.w, velocity.w, cfg);
    sgd_update(head.b, grad.b, velocity.b, cfg);
}

namespace {

template <typename Derived>
void append(Vector& out, Eigen::Index& at, const Eigen::MatrixBase<Derived>& m)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out(at++) = m(i, j);
}

template <typename Derived>
void extract(const Vector& v, Eigen::Index& at, Eigen::MatrixBase<Derived>& m)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v(at++);
}

}  // namespace

Vector flatten(const Encoder& e)
{
    Vector v(e.w1.size() + e.b1.size() + e.w2.size() + e.b2.size());
    Eigen::Index at = 0;
    append(v, at, e.w1);
    append(v, at, e.b1);
    append(v, at, e.w2);
    append(v, at, e.b2);
    return v;
}

void unflatten(Encoder& e, const Vector& v)
{
    if (v.size() != e.w1.size() + e.b1.size() + e.w2.size() + e.b2.size())
        throw std::invalid_argument("unflatten: size mismatch");
    Eigen::Index at = 0;
    extract(v, at, e.w1);
    extract(v, at, e.b1);
    extract(v, at, e.w2);
    extract(v, at, e.b2);
}

Vector flatten(const ClassifierHead& h)
{
    Vector v(h.w.size() + h.b.size());
    Eigen::Index at = 0;
    append(v, at, h.w);
    append(v, at, h.b);
    return v;
}

void unflatten(ClassifierHead& h, const Vector& v)
{
    if (v.size() != h.w.size() + h.b.size()) throw std::invalid_argument("unflatten: size mismatch");
    Eigen::Index at = 0;
    extract(v, at, h.w);
    extract(v, at, h.b);
}

namespace {

template <typename Derived>
void write_tensor(std::ostream& os, const std::string& name, const Eigen::MatrixBase<Derived>& m)
{
    os << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    bool first = true;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!first) os << ' ';
            os << format_double(m(i, j));
            first = false;
        }
    os << '\n';
}

Matrix read_tensor(std::istream& is, const std::string& expected_name)
{
    std::string line;
    if (!std::getline(is, line)) throw DataError("checkpoint: missing tensor " + expected_name);
    std::istringstream header(line);
    std::string tag, name;
    long rows = -1, cols = -1;
    header >> tag >> name >> rows >> cols;
    if (tag != "tensor" || name != expected_name || rows < 0 || cols < 0)
        throw DataError("checkpoint: bad header for tensor " + expected_name + ": '" + line + "'");
    if (!std::getline(is, line)) throw DataError("checkpoint: missing values for " + name);
    const auto tokens = rows * cols == 0 ? std::vector<std::string>{} : split(trim(line), ' ');
    if (static_cast<long>(tokens.size()) != rows * cols)
        throw DataError("checkpoint: value count mismatch for " + name);
    Matrix m(rows, cols);
    std::size_t t = 0;
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = parse_double(tokens[t++]);
    return m;
}

}  // namespace

void save_checkpoint(std::ostream& os, const Encoder& enc)
{
    os << "hypass-checkpoint 1\n";
    write_tensor(os, "encoder.w1", enc.w1);
    write_tensor(os, "encoder.b1", enc.b1);
    write_tensor(os, "encoder.w2", enc.w2);
    write_tensor(os, "encoder.b2", enc.b2);
}

void save_checkpoint(const std::string& path, const Encoder& enc)
{
    std::ostringstream ss;
    save_checkpoint(ss, enc);
    write_text_file(path, ss.str());
}

Encoder load_checkpoint(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || trim(line) != "hypass-checkpoint 1")
        throw DataError("checkpoint: missing 'hypass-checkpoint 1' header");
    Encoder e;
    e.w1 = read_tensor(is, "encoder.w1");
    e.b1 = read_tensor(is, "encoder.b1");
    e.w2 = read_tensor(is, "encoder.w2");
    e.b2 = read_tensor(is, "encoder.b2");
    if (e.b1.size() != e.w1.rows() || e.w2.cols() != e.w1.rows() || e.b2.size() != e.w2.rows())
        throw DataError("checkpoint: inconsistent tensor shapes");
    return e;
}

Encoder load_checkpoint(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "'");
    return load_checkpoint(is);
}

}  // namespace hypass
