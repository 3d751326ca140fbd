#pragma once

#include "hypass/alignment.hpp"
#include "hypass/cluster_metrics.hpp"
#include "hypass/clustering.hpp"
#include "hypass/encoder.hpp"
#include "hypass/hp_search.hpp"
#include "hypass/synth_data.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypass {

enum class HPMode { Bayes, Grid, Fixed };

std::string to_string(HPMode m);
HPMode hp_mode_from_string(const std::string& s);

struct LossSwitches {
    bool target_id = true;
    bool source_id = true;
    bool alignment = true;

    bool any() const { return target_id || source_id || alignment; }
};

struct LoopConfig {
    int n_epochs = 50;
    int init_epochs = 30;
    int batches_per_epoch = 8;

    ClusteringSpec clustering;  // eps / k are overridden by the selected lambda
    HPMode hp_mode = HPMode::Bayes;
    std::optional<double> fixed_lambda;
    MetricKind metric = MetricKind::ARI;
    int search_budget = 50;
    double grid_step = 0.05;
    std::optional<double> eps0;

    LossSwitches losses;
    bool drop_noise = true;  // false keeps noise points as singleton pseudo-classes

    int p = 8;
    int k = 4;
    double margin = 0.3;
    double head_scale = 8.0;  // norm of the centroid-seeded target classifier rows
    SgdConfig sgd;
    int hidden_dim = 64;
    int feature_dim = 32;
    std::size_t max_pairs = kDefaultMaxPairs;

    std::uint64_t seed = 1;

    void validate() const;
    HPSearchSpace search_space(std::size_t n_target) const;
};

// Loss-term and HP-mode switches of ablation variants 1..5; variant 4 runs
// with the fixed empirical lambda, every other variant tunes automatically.
LoopConfig apply_variant(LoopConfig config, int variant, double empirical_lambda);

struct CycleRecord {
    int epoch = 0;
    double lambda = 0.0;
    double val_score = 0.0;    // criterion value of lambda on the source validation set
    double target_ari = 0.0;   // against held-out target identities, reporting only
    int n_clusters = 0;
    int n_noise = 0;
    double loss_source_id = 0.0;
    double loss_target_id = 0.0;
    double loss_align = 0.0;
    double loss_total = 0.0;
    double wall_seconds = 0.0;
};

struct StepBatch {
    Matrix source_points;
    Labels source_labels;  // contiguous source classes
    Matrix target_points;
    Labels target_labels;  // contiguous pseudo-classes
};

struct TotalLoss {
    double source_id = 0.0;
    double target_id = 0.0;
    double align = 0.0;
    double total = 0.0;
    bool align_applied = false;
    Encoder grad_encoder;
    ClassifierHead grad_source_head;
    ClassifierHead grad_target_head;
};

// L_total = L^T_ID + L^S_ID + L^cond_align over one source and one target
// batch, unweighted, restricted to the enabled terms. Each ID term is
// cross-entropy plus batch-hard triplet. The alignment term is skipped when a
// conditional similarity sample is empty.
TotalLoss total_loss(const Encoder& enc, const ClassifierHead& source_head,
                     const ClassifierHead& target_head, const StepBatch& batch,
                     const LossSwitches& terms, double margin, const AlignmentOptions& align = {});

struct FinalEvaluation {
    double lambda = 0.0;
    double target_ari = 0.0;
    double target_nmi = 0.0;
    int n_clusters = 0;
    int n_noise = 0;
    double mean_ap = 0.0;
    double rank1 = 0.0;
};

struct RunOutput {
    Encoder encoder;
    std::vector<CycleRecord> records;
    FinalEvaluation final;
};

// Source ID + marginal alignment pre-training for config.init_epochs epochs.
Encoder initialize(const DomainDataset& source_train, const DomainDataset& target_train,
                   const LoopConfig& config);

// Throws std::invalid_argument when source_val overlaps source_train.
RunOutput run(const DomainDataset& source_train, const DomainDataset& source_val,
              const DomainDataset& target_train, const LoopConfig& config);

// Tunes (or fixes) lambda on the validation features, clusters the target and
// scores it against the held-out identities; retrieval uses a per-identity
// alternating query/gallery split of the target.
FinalEvaluation evaluate(const Encoder& enc, const DomainDataset& source_val,
                         const DomainDataset& target, const LoopConfig& config);

struct SweepRow {
    double lambda = 0.0;
    double target_ari = 0.0;
    double mean_ap = 0.0;
};

std::vector<SweepRow> sensitivity_sweep(const DomainDataset& source_train, const DomainDataset& source_val,
                                        const DomainDataset& target_train,
                                        const std::vector<double>& lambda_values, const LoopConfig& config);

// Lambda with the best final target ARI; ties go to the first listed.
double sweep_argmax(const std::vector<SweepRow>& rows);

void write_records_csv(std::ostream& os, const std::vector<CycleRecord>& records);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

// Run config: one "key = value" per line, '#' starts a comment.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
    std::string preset_name = "standard";
    GenerationParams data = hypass::preset("standard", 1);
    std::size_t n_val = 160;
    std::string source_csv;  // when set, data comes from these files instead
    std::string target_csv;
    LoopConfig loop;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string format_config(const ExperimentConfig& config);

struct PreparedData {
    DomainDataset source_train;
    DomainDataset source_val;
    DomainDataset target;
};

PreparedData prepare_data(const ExperimentConfig& config);

// result.json payload. Reading rejects unknown fields and other versions.
struct RunResult {
    static constexpr int kSchemaVersion = 1;
    std::string mode;
    std::uint64_t seed = 0;
    int n_epochs = 0;
    FinalEvaluation final;
    std::vector<double> lambda_history;
    std::vector<double> target_ari_history;
};

RunResult make_result(const std::string& mode, const LoopConfig& config, const RunOutput& out);
std::string to_json(const RunResult& r);
RunResult result_from_json(const std::string& text);

}  // namespace hypass
