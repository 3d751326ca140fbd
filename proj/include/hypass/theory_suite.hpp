#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hypass::theory {

// One row of the verification report.
struct TheoryCheck {
    std::string config;
    double estimate = 0.0;
    double target = 0.0;
    double variance = 0.0;
    double bound = 0.0;
    bool pass = false;
};

struct TheorySuiteOptions {
    std::vector<double> alphas{1.0, 2.0};
    // Mean gap between the source N(-gap, 1) and target N(0, 1) toys.
    std::vector<double> gaps{0.25, 0.5, 1.0};
    std::size_t n = 1000;             // samples per weighted estimate
    std::size_t replicates = 2000;    // estimates per variance measurement
    std::size_t repetitions = 20;     // variance measurements per bound check
    std::size_t n_mc = 200000;        // Monte-Carlo draws per divergence
    std::size_t argmin_profiles = 50;
    std::uint64_t seed = 1;

    void validate() const;
    TheorySuiteOptions quick() const;  // smaller n, repetitions and Monte-Carlo budgets
};

// Checks, each on scalar Gaussian toys with cost 1{x > 0}:
//  identical/...   divergences of identical densities equal 1
//  gaussian/...    Monte-Carlo divergence against the closed form
//  unbiased/...    mean of replicated weighted risks within 3 standard errors
//                  of the quadrature target risk
//  bound/...       measured estimator variance under the variance bound in
//                  >= 95% of repetitions
//  monotone/...    variance does not decrease along the gap schedule
//  ordering/...    a lower-divergence toy gives the lower variance
//  argmin/...      constant weights keep the risk minimizer; an adversarial
//                  weight profile moves it (reported with pass = moved)
std::vector<TheoryCheck> run_theory_suite(const TheorySuiteOptions& options);

// Header "config,estimate,target,variance,bound,pass".
void write_theory_csv(std::ostream& os, const std::vector<TheoryCheck>& rows);

bool all_pass(const std::vector<TheoryCheck>& rows);

}  // namespace hypass::theory
