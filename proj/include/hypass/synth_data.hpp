#pragma once

#include "hypass/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>

namespace hypass {

// Labeled or held-out point set of one domain. Target labels are ground truth
// kept only for scoring; the training loop never reads them.
struct DomainDataset {
    Matrix points;
    Labels identity_labels;
    Domain domain = Domain::Source;
    std::uint64_t seed = 0;
    // Row index of each point in the dataset it was generated as; used to check
    // disjointness of splits.
    std::vector<std::size_t> origin;

    std::size_t size() const { return identity_labels.size(); }
    int n_identities() const;
};

// Throws std::invalid_argument unless the set holds >= 2 identities with >= 2
// samples each and consistent shapes.
void validate(const DomainDataset& ds);

struct ShiftSpec {
    double rotation_angle = 0.0;  // radians, acts on the first two coordinates
    Vector translation;           // empty means zero
    double scale = 1.0;
    double noise_sigma_source = 0.1;
    double noise_sigma_target = 0.1;

    // Maps a source-law identity center to its target-domain location.
    Vector apply(const Vector& center) const;
    bool is_identity() const;
};

void validate(const ShiftSpec& s, int dim);

struct GenerationParams {
    std::uint64_t seed = 1;
    int n_ids_source = 60;
    int n_ids_target = 30;
    int samples_per_id = 8;
    int dim = 16;
    ShiftSpec shift;
};

// Named benchmark presets: "standard", "zero-shift", "alternate".
GenerationParams preset(const std::string& name, std::uint64_t seed);
std::vector<std::string> preset_names();

struct DomainPair {
    DomainDataset source;
    DomainDataset target;
};

// Identity-structured Gaussian mixtures. Centers are drawn uniformly in
// [-1,1]^dim from stream derive_seed(seed, 0): all source centers first, then
// the raw target centers, which are then moved by the shift. Samples come from
// streams 1 (source) and 2 (target). Target ids start at n_ids_source.
DomainPair generate_domain_pair(std::uint64_t seed, int n_ids_source, int n_ids_target,
                                int samples_per_id, int dim, const ShiftSpec& shift);
DomainPair generate_domain_pair(const GenerationParams& params);

struct SplitResult {
    DomainDataset train;
    DomainDataset val;
};

// Moves n_val points to a validation set, taking whole identities in a seeded
// order where possible so that validation identities are mostly unseen in
// training. Both halves must remain valid datasets.
SplitResult split_validation(const DomainDataset& source, std::size_t n_val, std::uint64_t seed);

DomainDataset subset(const DomainDataset& ds, const std::vector<std::size_t>& rows);

// CSV: header "id,domain,x_0,...,x_{d-1}", one row per point.
void write_csv(std::ostream& os, const DomainDataset& ds);
void write_csv(const std::string& path, const DomainDataset& ds);
DomainDataset read_csv(std::istream& is);
DomainDataset read_csv(const std::string& path);

}  // namespace hypass
