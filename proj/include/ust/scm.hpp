#ifndef UST_SCM_HPP
#define UST_SCM_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ust/causal_graph.hpp"
#include "ust/dataset.hpp"

namespace ust {

// ----------------------------------------------------------- synthetic data

struct SyntheticConfig {
    std::size_t n = 10'000;
    std::uint64_t seed = 1;
    /// Scale of the direct effect of A on Y.
    double delta = 1.0;
    /// C = collider_y_weight * Y + collider_a_weight * A + U[0, noise_bound]
    double collider_y_weight = 1.0;
    double collider_a_weight = 1.0;
    double noise_bound = 0.01;

    void validate() const;
};

/// f_Y = 4 x1 + 2 x2 + 2 x5 + 4 x6 + 4 x8
double synthetic_outcome_score(double x1, double x2, double x5, double x6, double x8);

/// tau = delta * (eta1 + eta2 + eta7), eta_j = 2 x_j when x_j > 0, else 0.
double synthetic_tau(double x1, double x2, double x7, double delta);

/// Ground-truth individual effect |g(f_Y) - g(f_Y - tau)| with
/// g(t) = 1 / (1 + e^t).
double true_ds(double tau, double outcome_score);
double true_ds(double x1, double x2, double x5, double x6, double x7, double x8, double delta);

/// Columns: A, X1..X10, C, Y, tau, true_ds. Roles A (protected) and Y
/// (outcome). Bit-identical for identical configurations.
Dataset generate_synthetic(const SyntheticConfig& config);

/// The generating graph of generate_synthetic (X1..X10, A, C, Y).
Dag synthetic_dag();

/// Attribute names that are model inputs (everything except Y and the
/// ground-truth columns).
std::vector<std::string> synthetic_feature_names(bool include_collider);

// ------------------------------------------------------------ discrete SCM

/// A discrete structural causal model given by conditional probability tables.
///
/// The CPT of node v has one row per configuration of v's parents (in the
/// order returned by Dag::parents_of, first parent varying slowest) and one
/// column per value of v.
class DiscreteScm {
public:
    DiscreteScm(Dag dag, std::vector<std::size_t> domains, std::vector<std::vector<std::vector<double>>> cpts);

    const Dag& dag() const { return m_dag; }
    const std::vector<std::size_t>& domains() const { return m_domains; }
    const std::vector<std::vector<double>>& cpt(std::size_t node) const { return m_cpts.at(node); }

    std::size_t parent_row(std::size_t node, std::span<const int> state) const;
    double probability(std::size_t node, std::span<const int> state) const;

    /// Schema for sampled data: binary for two-valued nodes, categorical
    /// with levels "0".."k-1" otherwise.
    Schema schema(const AuditRoles& roles = {}) const;

    /// Joint state-space size, saturating at SIZE_MAX.
    std::size_t state_space() const;

    std::string to_json() const;
    static DiscreteScm from_json(std::string_view text);

private:
    Dag m_dag;
    std::vector<std::size_t> m_domains;
    std::vector<std::vector<std::vector<double>>> m_cpts;
};

using Intervention = std::map<std::string, int>;

/// Ancestral sampling in topological order.
Dataset scm_sample(const DiscreteScm& scm, std::size_t n, std::uint64_t seed, const AuditRoles& roles = {});

/// Sampling from the mutilated model: intervened nodes lose their incoming
/// edges and are pinned to the given value.
Dataset scm_intervene_sample(const DiscreteScm& scm, const Intervention& interventions, std::size_t n,
                             std::uint64_t seed, const AuditRoles& roles = {});

inline constexpr std::size_t kMaxEnumeratedStates = 10'000'000;

/// Full joint distribution of the (optionally mutilated) model, indexed in
/// mixed radix over node order (node 0 varying slowest).
std::vector<double> exact_joint(const DiscreteScm& scm, const Intervention& interventions = {});

/// P(target = value | evidence) in the (optionally mutilated) model by
/// enumeration.
double exact_probability(const DiscreteScm& scm, const std::string& target, int value, const Intervention& evidence,
                         const Intervention& interventions = {});

/// P(y=1 | do(A=1), do(B=b)) - P(y=1 | do(A=0), do(B=b)) by enumeration of the
/// mutilated joint.
double oracle_direct_effect(const DiscreteScm& scm, const AuditRoles& roles, const Intervention& b_values);

/// Random model on `nodes` nodes with positive CPT entries. Node order is a
/// topological order; each forward pair is an edge with probability
/// `edge_probability`.
DiscreteScm random_discrete_scm(std::size_t nodes, double edge_probability, std::size_t max_domain, std::uint64_t seed,
                                const std::vector<std::string>& names = {});

}  // namespace ust

#endif  // UST_SCM_HPP
