#include "hypass/hypass_loop.hpp"

#include "hypass/io.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

namespace hypass {

std::string to_string(HPMode m)
{
    switch (m) {
    case HPMode::Bayes: return "bayes";
    case HPMode::Grid: return "grid";
    case HPMode::Fixed: return "fixed";
    }
    return "?";
}

HPMode hp_mode_from_string(const std::string& s)
{
    if (s == "bayes") return HPMode::Bayes;
    if (s == "grid") return HPMode::Grid;
    if (s == "fixed") return HPMode::Fixed;
    throw std::invalid_argument("unknown HP mode '" + s + "'");
}

void LoopConfig::validate() const
{
    if (n_epochs < 0 || init_epochs < 0) throw std::invalid_argument("loop: epoch counts must be >= 0");
    if (batches_per_epoch < 1) throw std::invalid_argument("loop: batches_per_epoch must be >= 1");
    if (!losses.any()) throw std::invalid_argument("loop: at least one loss term must be enabled");
    if (hp_mode == HPMode::Fixed && !fixed_lambda)
        throw std::invalid_argument("loop: fixed HP mode needs a lambda");
    if (search_budget < 3 && hp_mode == HPMode::Bayes)
        throw std::invalid_argument("loop: Bayesian search budget must be >= 3");
    if (search_budget < 1) throw std::invalid_argument("loop: search budget must be >= 1");
    if (!(grid_step > 0)) throw std::invalid_argument("loop: grid_step must be > 0");
    if (p < 2 || k < 2) throw std::invalid_argument("loop: P and K must be >= 2");
    if (!(margin >= 0)) throw std::invalid_argument("loop: margin must be >= 0");
    if (!(sgd.learning_rate >= 0)) throw std::invalid_argument("loop: learning rate must be >= 0");
    if (!(sgd.momentum >= 0 && sgd.momentum < 1)) throw std::invalid_argument("loop: momentum must be in [0, 1)");
    if (!(sgd.weight_decay >= 0)) throw std::invalid_argument("loop: weight decay must be >= 0");
    if (!(head_scale > 0)) throw std::invalid_argument("loop: head_scale must be > 0");
    if (hidden_dim < 1 || feature_dim < 2) throw std::invalid_argument("loop: bad network dimensions");
    clustering.validate();
}

HPSearchSpace LoopConfig::search_space(std::size_t n_target) const
{
    if (clustering.algorithm == ClusteringAlgorithm::KMeans)
        return HPSearchSpace::k_range(static_cast<int>(n_target), search_budget);
    return HPSearchSpace::eps_range(search_budget);
}

LoopConfig apply_variant(LoopConfig c, int variant, double empirical_lambda)
{
    if (variant < 1 || variant > 5) throw std::invalid_argument("ablation variant must be in 1..5");
    const bool align = variant == 2 || variant >= 4;
    const bool source = variant == 3 || variant >= 4;
    c.losses = {true, source, align};
    if (variant == 4) {
        c.hp_mode = HPMode::Fixed;
        c.fixed_lambda = empirical_lambda;
    } else if (c.hp_mode == HPMode::Fixed) {
        c.hp_mode = HPMode::Bayes;
    }
    return c;
}

namespace {

void add_into(Encoder& a, const Encoder& b)
{
    a.w1 += b.w1;
    a.b1 += b.b1;
    a.w2 += b.w2;
    a.b2 += b.b2;
}

Labels contiguous(const Labels& raw) { return make_partition(raw).assignment; }

Matrix rows_of(const Matrix& x, const std::vector<std::size_t>& idx) { return select_rows(x, idx); }

Labels labels_of(const Labels& l, const std::vector<std::size_t>& idx)
{
    Labels out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(l[i]);
    return out;
}

struct TrainState {
    Encoder enc;
    Encoder enc_vel;
    ClassifierHead source_head;
    ClassifierHead source_vel;
};

// Pseudo-class head seeded with normalized cluster centroids, so the
// classifier agrees with the clustering from the first step of the cycle.
ClassifierHead centroid_head(const Matrix& features, const Labels& labels, int n_classes, double scale)
{
    ClassifierHead h;
    h.w = Matrix::Zero(n_classes, features.cols());
    h.b = Vector::Zero(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) h.w.row(labels[i]) += features.row(static_cast<Eigen::Index>(i));
    h.w = normalize_rows(h.w) * scale;
    return h;
}

double elapsed(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

TotalLoss total_loss(const Encoder& enc, const ClassifierHead& source_head, const ClassifierHead& target_head,
                     const StepBatch& batch, const LossSwitches& terms, double margin,
                     const AlignmentOptions& align)
{
    TotalLoss r;
    r.grad_encoder = Encoder::zeros_like(enc);
    r.grad_source_head = ClassifierHead::zeros_like(source_head);
    r.grad_target_head = ClassifierHead::zeros_like(target_head);

    const bool has_source = batch.source_points.rows() > 0;
    const bool has_target = batch.target_points.rows() > 0;
    const bool use_source = has_source && (terms.source_id || terms.alignment);
    const bool use_target = has_target && (terms.target_id || terms.alignment);

    EncoderCache cs, ct;
    Matrix gs, gt;
    if (use_source) {
        cs = forward(enc, batch.source_points);
        gs = Matrix::Zero(cs.features.rows(), cs.features.cols());
    }
    if (use_target) {
        ct = forward(enc, batch.target_points);
        gt = Matrix::Zero(ct.features.rows(), ct.features.cols());
    }

    if (terms.source_id && has_source) {
        const auto ce = cross_entropy_loss(source_head, cs.features, batch.source_labels);
        const auto tri = batch_hard_triplet_loss(cs.features, batch.source_labels, margin);
        r.source_id = ce.loss + tri.loss;
        gs += ce.grad_features + tri.grad_features;
        r.grad_source_head = ce.grad_head;
    }
    if (terms.target_id && has_target) {
        const auto ce = cross_entropy_loss(target_head, ct.features, batch.target_labels);
        const auto tri = batch_hard_triplet_loss(ct.features, batch.target_labels, margin);
        r.target_id = ce.loss + tri.loss;
        gt += ce.grad_features + tri.grad_features;
        r.grad_target_head = ce.grad_head;
    }
    if (terms.alignment && has_source && has_target) {
        try {
            const auto a = conditional_alignment_loss(cs.features, batch.source_labels, ct.features,
                                                      batch.target_labels, align);
            r.align = a.loss;
            r.align_applied = true;
            gs += a.grad_source;
            gt += a.grad_target;
        } catch (const std::invalid_argument&) {
            // degenerate pseudo-labels (e.g. one cluster): no conditional pairs
        }
    }
    r.total = r.target_id + r.source_id + r.align;

    if (use_source) add_into(r.grad_encoder, backward(enc, cs, gs));
    if (use_target) add_into(r.grad_encoder, backward(enc, ct, gt));
    return r;
}

namespace {

TrainState init_state(const DomainDataset& source, const DomainDataset& target, const LoopConfig& cfg)
{
    validate(source);
    if (target.size() < 2) throw std::invalid_argument("initialize: target set needs >= 2 samples");
    if (source.points.cols() != target.points.cols())
        throw std::invalid_argument("initialize: source/target dimension mismatch");
    cfg.validate();

    const Labels source_labels = contiguous(source.identity_labels);
    const int n_classes = *std::max_element(source_labels.begin(), source_labels.end()) + 1;
    TrainState st;
    st.enc = Encoder::random(static_cast<int>(source.points.cols()), cfg.hidden_dim, cfg.feature_dim,
                             derive_seed(cfg.seed, 1));
    st.enc_vel = Encoder::zeros_like(st.enc);
    st.source_head = ClassifierHead::random(cfg.feature_dim, n_classes, derive_seed(cfg.seed, 2));
    st.source_vel = ClassifierHead::zeros_like(st.source_head);
    if (cfg.init_epochs == 0) return st;

    PKBatchSampler sampler(source_labels, std::min(cfg.p, n_classes), cfg.k, derive_seed(cfg.seed, 3));
    std::mt19937_64 rng(derive_seed(cfg.seed, 4));
    std::vector<std::size_t> target_idx(target.size());
    std::iota(target_idx.begin(), target_idx.end(), std::size_t{0});
    const std::size_t n_target_batch =
        std::min(target.size(), static_cast<std::size_t>(sampler.p() * sampler.k()));
    AlignmentOptions align{cfg.max_pairs, derive_seed(cfg.seed, 5)};

    for (int epoch = 0; epoch < cfg.init_epochs; ++epoch) {
        for (int b = 0; b < cfg.batches_per_epoch; ++b) {
            const auto sidx = sampler.next_batch();
            std::shuffle(target_idx.begin(), target_idx.end(), rng);
            const std::vector<std::size_t> tidx(target_idx.begin(),
                                                target_idx.begin() + static_cast<std::ptrdiff_t>(n_target_batch));
            const Labels sl = labels_of(source_labels, sidx);

            const EncoderCache cs = forward(st.enc, rows_of(source.points, sidx));
            const EncoderCache ct = forward(st.enc, rows_of(target.points, tidx));
            const auto ce = cross_entropy_loss(st.source_head, cs.features, sl);
            const auto tri = batch_hard_triplet_loss(cs.features, sl, cfg.margin);
            align.seed = derive_seed(derive_seed(cfg.seed, 5), static_cast<std::uint64_t>(epoch * 1000 + b));
            const auto al = marginal_alignment_loss(cs.features, ct.features, align);

            Encoder grad = backward(st.enc, cs, ce.grad_features + tri.grad_features + al.grad_source);
            add_into(grad, backward(st.enc, ct, al.grad_target));
            sgd_step(st.enc, grad, st.enc_vel, cfg.sgd);
            sgd_step(st.source_head, ce.grad_head, st.source_vel, cfg.sgd);
        }
    }
    return st;
}

double select_lambda(const Matrix& val_features, const Labels& val_labels, std::size_t n_target,
                     const LoopConfig& cfg, std::uint64_t seed, double* score)
{
    if (cfg.hp_mode == HPMode::Fixed) {
        if (score)
            *score = objective_one_clustering(val_features, val_labels, cfg.clustering, *cfg.fixed_lambda,
                                              cfg.metric);
        return *cfg.fixed_lambda;
    }
    TuningOptions opt;
    opt.strategy = cfg.hp_mode == HPMode::Grid ? SearchStrategy::Grid : SearchStrategy::Bayes;
    opt.metric = cfg.metric;
    opt.grid_step = cfg.grid_step;
    opt.seed = seed;
    opt.eps0 = cfg.eps0;
    const auto r = auto_hp_tuning(val_features, val_labels, cfg.clustering, cfg.search_space(n_target), opt);
    if (score) *score = r.best_score;
    return r.best_lambda;
}

Partition cluster_with(const Matrix& features, const ClusteringSpec& tmpl, double lambda)
{
    ClusteringSpec spec = tmpl;
    if (spec.algorithm == ClusteringAlgorithm::KMeans)
        spec.k = std::clamp(static_cast<int>(std::lround(lambda)), 1, static_cast<int>(features.rows()));
    else
        spec.eps = lambda;
    return cluster(features, spec);
}

void check_disjoint(const DomainDataset& train, const DomainDataset& val)
{
    if (!train.origin.empty() && !val.origin.empty()) {
        const std::set<std::size_t> seen(train.origin.begin(), train.origin.end());
        for (auto o : val.origin)
            if (seen.count(o)) throw std::invalid_argument("run: source validation set overlaps training set");
        return;
    }
    for (Eigen::Index i = 0; i < val.points.rows(); ++i)
        for (Eigen::Index j = 0; j < train.points.rows(); ++j)
            if (val.points.row(i) == train.points.row(j))
                throw std::invalid_argument("run: source validation set overlaps training set");
}

}  // namespace

Encoder initialize(const DomainDataset& source_train, const DomainDataset& target_train, const LoopConfig& config)
{
    return init_state(source_train, target_train, config).enc;
}

FinalEvaluation evaluate(const Encoder& enc, const DomainDataset& source_val, const DomainDataset& target,
                         const LoopConfig& cfg)
{
    const Matrix ft = encode(enc, target.points);
    const Matrix fv = encode(enc, source_val.points);
    FinalEvaluation ev;
    ev.lambda = select_lambda(fv, source_val.identity_labels, target.size(), cfg, derive_seed(cfg.seed, 99),
                              nullptr);
    const Partition part = cluster_with(ft, cfg.clustering, ev.lambda);
    ev.target_ari = ari(target.identity_labels, part);
    ev.target_nmi = nmi(target.identity_labels, part);
    ev.n_clusters = part.n_clusters;
    ev.n_noise = part.n_noise();

    // Alternate query/gallery within each identity, in row order.
    std::vector<std::size_t> q, g;
    std::vector<int> seen_count;
    const Labels ids = contiguous(target.identity_labels);
    seen_count.assign(static_cast<std::size_t>(*std::max_element(ids.begin(), ids.end()) + 1), 0);
    for (std::size_t i = 0; i < ids.size(); ++i)
        (seen_count[static_cast<std::size_t>(ids[i])]++ % 2 == 0 ? q : g).push_back(i);
    const auto rs = retrieval_scores(rows_of(ft, q), rows_of(ft, g), labels_of(ids, q), labels_of(ids, g));
    ev.mean_ap = rs.mean_ap;
    ev.rank1 = rs.rank1;
    return ev;
}

RunOutput run(const DomainDataset& source_train, const DomainDataset& source_val,
              const DomainDataset& target_train, const LoopConfig& cfg)
{
    validate(source_val);
    check_disjoint(source_train, source_val);
    if (source_val.points.cols() != source_train.points.cols())
        throw std::invalid_argument("run: validation dimension mismatch");

    TrainState st = init_state(source_train, target_train, cfg);
    const Labels source_labels = contiguous(source_train.identity_labels);
    const int n_source_classes = st.source_head.n_classes();
    PKBatchSampler source_sampler(source_labels, std::min(cfg.p, n_source_classes), cfg.k,
                                  derive_seed(cfg.seed, 6));

    RunOutput out;
    for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto ep = static_cast<std::uint64_t>(epoch);
        CycleRecord rec;
        rec.epoch = epoch;

        const Matrix ft = encode(st.enc, target_train.points);
        const Matrix fv = encode(st.enc, source_val.points);
        rec.lambda = select_lambda(fv, source_val.identity_labels, target_train.size(), cfg,
                                   derive_seed(derive_seed(cfg.seed, 7), ep), &rec.val_score);
        const Partition part = cluster_with(ft, cfg.clustering, rec.lambda);
        rec.target_ari = ari(target_train.identity_labels, part);
        rec.n_clusters = part.n_clusters;
        rec.n_noise = part.n_noise();

        // Pseudo-labeled subset for this cycle.
        std::vector<std::size_t> members;
        Labels pseudo;
        int next_id = part.n_clusters;
        for (std::size_t i = 0; i < part.size(); ++i) {
            const int a = part.assignment[i];
            if (a == NOISE && cfg.drop_noise) continue;
            members.push_back(i);
            pseudo.push_back(a == NOISE ? next_id++ : a);
        }
        const int n_pseudo = next_id;
        const bool target_usable = n_pseudo >= 2;
        if (!target_usable && cfg.losses.target_id)
            std::clog << "warning: epoch " << epoch << ": fewer than 2 pseudo-classes, target terms skipped\n";

        ClassifierHead target_head = centroid_head(select_rows(ft, members), pseudo, std::max(n_pseudo, 1),
                                                   cfg.head_scale);
        ClassifierHead target_vel = ClassifierHead::zeros_like(target_head);
        std::optional<PKBatchSampler> target_sampler;
        if (target_usable)
            target_sampler.emplace(pseudo, std::min(cfg.p, n_pseudo), cfg.k,
                                   derive_seed(derive_seed(cfg.seed, 9), ep));

        double sum_s = 0, sum_t = 0, sum_a = 0;
        for (int b = 0; b < cfg.batches_per_epoch; ++b) {
            StepBatch batch;
            if (cfg.losses.source_id || cfg.losses.alignment) {
                const auto sidx = source_sampler.next_batch();
                batch.source_points = rows_of(source_train.points, sidx);
                batch.source_labels = labels_of(source_labels, sidx);
            }
            if (target_sampler) {
                const auto bidx = target_sampler->next_batch();
                std::vector<std::size_t> tidx;
                for (auto i : bidx) tidx.push_back(members[i]);
                batch.target_points = rows_of(target_train.points, tidx);
                batch.target_labels = labels_of(pseudo, bidx);
            }
            const AlignmentOptions align{cfg.max_pairs,
                                         derive_seed(derive_seed(cfg.seed, 10), ep * 100003 + static_cast<std::uint64_t>(b))};
            const TotalLoss loss = total_loss(st.enc, st.source_head, target_head, batch, cfg.losses, cfg.margin, align);
            sum_s += loss.source_id;
            sum_t += loss.target_id;
            sum_a += loss.align;
            sgd_step(st.enc, loss.grad_encoder, st.enc_vel, cfg.sgd);
            if (cfg.losses.source_id) sgd_step(st.source_head, loss.grad_source_head, st.source_vel, cfg.sgd);
            if (cfg.losses.target_id && target_usable) sgd_step(target_head, loss.grad_target_head, target_vel, cfg.sgd);
        }
        const double nb = cfg.batches_per_epoch;
        rec.loss_source_id = sum_s / nb;
        rec.loss_target_id = sum_t / nb;
        rec.loss_align = sum_a / nb;
        rec.loss_total = rec.loss_target_id + rec.loss_source_id + rec.loss_align;
        rec.wall_seconds = elapsed(t0);
        out.records.push_back(rec);
    }
    out.final = evaluate(st.enc, source_val, target_train, cfg);
    out.encoder = std::move(st.enc);
    return out;
}

std::vector<SweepRow> sensitivity_sweep(const DomainDataset& source_train, const DomainDataset& source_val,
                                        const DomainDataset& target_train,
                                        const std::vector<double>& lambda_values, const LoopConfig& config)
{
    if (lambda_values.size() < 2) throw std::invalid_argument("sweep: need >= 2 lambda values");
    std::vector<SweepRow> rows;
    for (double l : lambda_values) {
        LoopConfig c = config;
        c.hp_mode = HPMode::Fixed;
        c.fixed_lambda = l;
        const auto out = run(source_train, source_val, target_train, c);
        rows.push_back({l, out.final.target_ari, out.final.mean_ap});
    }
    return rows;
}

double sweep_argmax(const std::vector<SweepRow>& rows)
{
    if (rows.empty()) throw std::invalid_argument("sweep_argmax: empty sweep");
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].target_ari > rows[best].target_ari) best = i;
    return rows[best].lambda;
}

void write_records_csv(std::ostream& os, const std::vector<CycleRecord>& records)
{
    os << "epoch,lambda,val_score,target_ari,n_clusters,n_noise,loss_source_id,loss_target_id,loss_align,"
          "loss_total,wall_seconds\n";
    for (const auto& r : records)
        os << r.epoch << ',' << format_double(r.lambda) << ',' << format_double(r.val_score) << ','
           << format_double(r.target_ari) << ',' << r.n_clusters << ',' << r.n_noise << ','
           << format_double(r.loss_source_id) << ',' << format_double(r.loss_target_id) << ','
           << format_double(r.loss_align) << ',' << format_double(r.loss_total) << ','
           << format_double(r.wall_seconds) << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    os << "lambda,target_ari,mean_ap\n";
    for (const auto& r : rows)
        os << format_double(r.lambda) << ',' << format_double(r.target_ari) << ',' << format_double(r.mean_ap)
           << '\n';
}

}  // namespace hypass
