#include "hypass/synth_data.hpp"

#include "hypass/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hypass {

int DomainDataset::n_identities() const
{
    return static_cast<int>(std::set<int>(identity_labels.begin(), identity_labels.end()).size());
}

void validate(const DomainDataset& ds)
{
    if (static_cast<std::size_t>(ds.points.rows()) != ds.identity_labels.size())
        throw std::invalid_argument("dataset: points/labels length mismatch");
    if (!ds.origin.empty() && ds.origin.size() != ds.identity_labels.size())
        throw std::invalid_argument("dataset: origin length mismatch");
    std::map<int, int> counts;
    for (int id : ds.identity_labels) ++counts[id];
    if (counts.size() < 2) throw std::invalid_argument("dataset: needs at least 2 identities");
    for (const auto& [id, c] : counts)
        if (c < 2)
            throw std::invalid_argument("dataset: identity " + std::to_string(id) +
                                        " has fewer than 2 samples");
}

Vector ShiftSpec::apply(const Vector& center) const
{
    Vector out = center;
    const double c = std::cos(rotation_angle);
    const double s = std::sin(rotation_angle);
    out(0) = c * center(0) - s * center(1);
    out(1) = s * center(0) + c * center(1);
    out *= scale;
    if (translation.size() > 0) out += translation;
    return out;
}

bool ShiftSpec::is_identity() const
{
    const bool no_translation = translation.size() == 0 || translation.isZero(0.0);
    return rotation_angle == 0.0 && no_translation && scale == 1.0 &&
           noise_sigma_source == noise_sigma_target;
}

void validate(const ShiftSpec& s, int dim)
{
    if (!(s.scale > 0)) throw std::invalid_argument("shift: scale must be > 0");
    if (!(s.noise_sigma_source > 0) || !(s.noise_sigma_target > 0))
        throw std::invalid_argument("shift: noise sigmas must be > 0");
    if (s.translation.size() != 0 && s.translation.size() != dim)
        throw std::invalid_argument("shift: translation dimension mismatch");
}

GenerationParams preset(const std::string& name, std::uint64_t seed)
{
    GenerationParams p;
    p.seed = seed;
    if (name == "standard") {
        p.shift.rotation_angle = 0.6;
        p.shift.translation = Vector::Constant(p.dim, 0.15);
        p.shift.scale = 1.1;
        p.shift.noise_sigma_source = 0.25;
        p.shift.noise_sigma_target = 0.3;
        return p;
    }
    if (name == "alternate") {
        p.shift.rotation_angle = -0.4;
        p.shift.translation = Vector::Constant(p.dim, -0.1);
        p.shift.scale = 0.9;
        p.shift.noise_sigma_source = 0.25;
        p.shift.noise_sigma_target = 0.16;
        return p;
    }
    if (name == "zero-shift") {
        p.shift.noise_sigma_source = 0.25;
        p.shift.noise_sigma_target = 0.25;
        return p;
    }
    throw std::invalid_argument("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names()
{
    return {"standard", "alternate", "zero-shift"};
}

namespace {

Matrix uniform_centers(std::mt19937_64& rng, int n, int dim)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix c(n, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) c(i, j) = u(rng);
    return c;
}

DomainDataset sample_identities(const Matrix& centers, int first_id, int samples_per_id,
                                double sigma, Domain domain, std::uint64_t seed,
                                std::uint64_t stream_seed)
{
    std::mt19937_64 rng(stream_seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    const int n_ids = static_cast<int>(centers.rows());
    const int dim = static_cast<int>(centers.cols());
    DomainDataset ds;
    ds.domain = domain;
    ds.seed = seed;
    ds.points.resize(n_ids * samples_per_id, dim);
    ds.identity_labels.resize(static_cast<std::size_t>(n_ids * samples_per_id));
    ds.origin.resize(ds.identity_labels.size());
    for (int id = 0; id < n_ids; ++id) {
        for (int k = 0; k < samples_per_id; ++k) {
            const int row = id * samples_per_id + k;
            for (int j = 0; j < dim; ++j) ds.points(row, j) = centers(id, j) + sigma * n01(rng);
            ds.identity_labels[static_cast<std::size_t>(row)] = first_id + id;
            ds.origin[static_cast<std::size_t>(row)] = static_cast<std::size_t>(row);
        }
    }
    return ds;
}

}  // namespace

DomainPair generate_domain_pair(std::uint64_t seed, int n_ids_source, int n_ids_target,
                                int samples_per_id, int dim, const ShiftSpec& shift)
{
    if (n_ids_source < 2 || n_ids_target < 2)
        throw std::invalid_argument("generate_domain_pair: need >= 2 identities per domain");
    if (samples_per_id < 2) throw std::invalid_argument("generate_domain_pair: samples_per_id < 2");
    if (dim < 2) throw std::invalid_argument("generate_domain_pair: dim < 2");
    validate(shift, dim);

    std::mt19937_64 center_rng(derive_seed(seed, 0));
    const Matrix source_centers = uniform_centers(center_rng, n_ids_source, dim);
    Matrix target_centers = uniform_centers(center_rng, n_ids_target, dim);
    for (int i = 0; i < n_ids_target; ++i)
        target_centers.row(i) = shift.apply(target_centers.row(i).transpose()).transpose();

    DomainPair pair;
    pair.source = sample_identities(source_centers, 0, samples_per_id, shift.noise_sigma_source,
                                    Domain::Source, seed, derive_seed(seed, 1));
    pair.target = sample_identities(target_centers, n_ids_source, samples_per_id,
                                    shift.noise_sigma_target, Domain::Target, seed,
                                    derive_seed(seed, 2));
    return pair;
}

DomainPair generate_domain_pair(const GenerationParams& p)
{
    return generate_domain_pair(p.seed, p.n_ids_source, p.n_ids_target, p.samples_per_id, p.dim,
                                p.shift);
}

DomainDataset subset(const DomainDataset& ds, const std::vector<std::size_t>& rows)
{
    DomainDataset out;
    out.domain = ds.domain;
    out.seed = ds.seed;
    out.points = select_rows(ds.points, rows);
    out.identity_labels.reserve(rows.size());
    out.origin.reserve(rows.size());
    for (auto r : rows) {
        out.identity_labels.push_back(ds.identity_labels[r]);
        out.origin.push_back(ds.origin.empty() ? r : ds.origin[r]);
    }
    return out;
}

SplitResult split_validation(const DomainDataset& source, std::size_t n_val, std::uint64_t seed)
{
    const std::size_t n = source.size();
    if (n_val < 2 || n_val >= n)
        throw std::invalid_argument("split_validation: need 2 <= n_val < N");

    std::map<int, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < n; ++i) by_id[source.identity_labels[i]].push_back(i);
    std::vector<int> ids;
    for (const auto& kv : by_id) ids.push_back(kv.first);
    std::mt19937_64 rng(derive_seed(seed, 11));
    std::shuffle(ids.begin(), ids.end(), rng);

    std::vector<char> to_val(n, 0);
    std::size_t remaining = n_val;
    for (int id : ids) {
        if (remaining == 0) break;
        auto rows = by_id[id];
        const std::size_t count = rows.size();
        // Largest take that leaves no identity with a single sample on either
        // side and no unfillable remainder of 1.
        // The first identity also leaves room for a second one.
        const bool first = remaining == n_val;
        auto admissible = [&](std::size_t t) {
            return t != 1 && count - t != 1 && remaining - t != 1 && !(first && remaining - t < 2);
        };
        std::size_t take = std::min(count, remaining);
        while (take > 0 && !admissible(take)) --take;
        std::shuffle(rows.begin(), rows.end(), rng);
        for (std::size_t k = 0; k < take; ++k) to_val[rows[k]] = 1;
        remaining -= take;
    }
    if (remaining != 0)
        throw std::invalid_argument("split_validation: cannot place n_val samples with >= 2 per identity");

    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t i = 0; i < n; ++i) (to_val[i] ? val_rows : train_rows).push_back(i);
    SplitResult out{subset(source, train_rows), subset(source, val_rows)};
    try {
        validate(out.train);
        validate(out.val);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("split_validation: ") + e.what());
    }
    return out;
}

void write_csv(std::ostream& os, const DomainDataset& ds)
{
    os << "id,domain";
    for (Eigen::Index j = 0; j < ds.points.cols(); ++j) os << ",x_" << j;
    os << '\n';
    const std::string dom = to_string(ds.domain);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.identity_labels[i] << ',' << dom;
        for (Eigen::Index j = 0; j < ds.points.cols(); ++j)
            os << ',' << format_double(ds.points(static_cast<Eigen::Index>(i), j));
        os << '\n';
    }
}

void write_csv(const std::string& path, const DomainDataset& ds)
{
    std::ostringstream ss;
    write_csv(ss, ds);
    write_text_file(path, ss.str());
}

DomainDataset read_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line)) throw DataError("csv: missing header");
    const auto header = split(trim(line), ',');
    if (header.size() < 3 || header[0] != "id" || header[1] != "domain")
        throw DataError("csv: header must start with id,domain,x_0");
    const std::size_t dim = header.size() - 2;
    for (std::size_t j = 0; j < dim; ++j)
        if (header[j + 2] != "x_" + std::to_string(j)) throw DataError("csv: bad column " + header[j + 2]);

    std::vector<std::vector<double>> rows;
    DomainDataset ds;
    std::size_t line_no = 1;
    bool first = true;
    while (std::getline(is, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(trim(line), ',');
        if (cells.size() != dim + 2)
            throw DataError("csv line " + std::to_string(line_no) + ": expected " +
                            std::to_string(dim + 2) + " fields");
        try {
            ds.identity_labels.push_back(static_cast<int>(parse_int(cells[0])));
            const Domain d = domain_from_string(cells[1]);
            if (first) ds.domain = d;
            else if (d != ds.domain)
                throw DataError("mixed domains");
            first = false;
            std::vector<double> v(dim);
            for (std::size_t j = 0; j < dim; ++j) v[j] = parse_double(cells[j + 2]);
            rows.push_back(std::move(v));
        } catch (const std::exception& e) {
            throw DataError("csv line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    ds.points.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < dim; ++j)
            ds.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    ds.origin.resize(rows.size());
    std::iota(ds.origin.begin(), ds.origin.end(), std::size_t{0});
    return ds;
}

DomainDataset read_csv(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "'");
    return read_csv(is);
}

}  // namespace hypass
