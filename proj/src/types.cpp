#include "hypass/types.hpp"

#include <stdexcept>
#include <unordered_map>

namespace hypass {

std::string to_string(Domain d)
{
    return d == Domain::Source ? "source" : "target";
}

Domain domain_from_string(const std::string& s)
{
    if (s == "source") return Domain::Source;
    if (s == "target") return Domain::Target;
    throw std::invalid_argument("unknown domain '" + s + "'");
}

int Partition::n_noise() const
{
    int n = 0;
    for (int a : assignment) n += (a == NOISE);
    return n;
}

Partition make_partition(const Labels& raw)
{
    Partition p;
    p.assignment.resize(raw.size());
    std::unordered_map<int, int> remap;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == NOISE) {
            p.assignment[i] = NOISE;
            continue;
        }
        auto [it, inserted] = remap.try_emplace(raw[i], static_cast<int>(remap.size()));
        p.assignment[i] = it->second;
    }
    p.n_clusters = static_cast<int>(remap.size());
    return p;
}

void check_partition(const Partition& p, bool allow_noise)
{
    std::vector<char> seen(static_cast<std::size_t>(std::max(p.n_clusters, 0)), 0);
    for (int a : p.assignment) {
        if (a == NOISE) {
            if (!allow_noise) throw std::logic_error("partition: unexpected NOISE label");
            continue;
        }
        if (a < 0 || a >= p.n_clusters) throw std::logic_error("partition: cluster id out of range");
        seen[static_cast<std::size_t>(a)] = 1;
    }
    for (char s : seen)
        if (!s) throw std::logic_error("partition: cluster ids are not contiguous");
}

Matrix select_rows(const Matrix& x, const std::vector<std::size_t>& rows)
{
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream)
{
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace hypass
