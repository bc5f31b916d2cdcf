#include "ust/scm.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

namespace ust {

namespace {

using json = nlohmann::json;

double eta(double x) { return x > 0.0 ? 2.0 * x : 0.0; }

// 1 / (1 + e^t) without overflow.
double logistic_tail(double t) {
    if (t > 0) {
        const double e = std::exp(-t);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(t));
}

Schema synthetic_schema() {
    using K = AttributeKind;
    std::vector<Attribute> attrs{{"A", K::binary, {}},     {"X1", K::continuous, {}}, {"X2", K::continuous, {}},
                                 {"X3", K::binary, {}},    {"X4", K::continuous, {}}, {"X5", K::continuous, {}},
                                 {"X6", K::continuous, {}}, {"X7", K::binary, {}},    {"X8", K::binary, {}},
                                 {"X9", K::continuous, {}}, {"X10", K::binary, {}},   {"C", K::continuous, {}},
                                 {"Y", K::binary, {}},     {"tau", K::continuous, {}}, {"true_ds", K::continuous, {}}};
    return Schema(std::move(attrs), AuditRoles{"A", "Y"});
}

std::size_t sample_index(std::mt19937_64& rng, const std::vector<double>& probs) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        acc += probs[k];
        if (u < acc) return k;
    }
    return probs.size() - 1;
}

void check_interventions(const DiscreteScm& scm, const Intervention& interventions) {
    for (const auto& [name, value] : interventions) {
        const auto idx = scm.dag().index_of(name);
        if (!idx) throw ValidationError("intervention on unknown node '" + name + "'");
        if (value < 0 || static_cast<std::size_t>(value) >= scm.domains()[*idx]) {
            throw ValidationError("intervention value " + std::to_string(value) + " is outside the domain of '" + name + "'");
        }
    }
}

}  // namespace

void SyntheticConfig::validate() const {
    if (n == 0) throw ValidationError("record count must be positive");
    if (!(noise_bound >= 0.0)) throw ValidationError("noise bound must be non-negative");
    if (!std::isfinite(delta) || !std::isfinite(collider_a_weight) || !std::isfinite(collider_y_weight)) {
        throw ValidationError("synthetic parameters must be finite");
    }
}

double synthetic_outcome_score(double x1, double x2, double x5, double x6, double x8) {
    return 4.0 * x1 + 2.0 * x2 + 2.0 * x5 + 4.0 * x6 + 4.0 * x8;
}

double synthetic_tau(double x1, double x2, double x7, double delta) { return delta * (eta(x1) + eta(x2) + eta(x7)); }

double true_ds(double tau, double outcome_score) {
    return std::abs(logistic_tail(outcome_score) - logistic_tail(outcome_score - tau));
}

double true_ds(double x1, double x2, double x5, double x6, double x7, double x8, double delta) {
    return true_ds(synthetic_tau(x1, x2, x7, delta), synthetic_outcome_score(x1, x2, x5, x6, x8));
}

Dataset generate_synthetic(const SyntheticConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double rho_normal = 0.5;
    const double cross = std::sqrt(1.0 - rho_normal * rho_normal);
    // (X7, X8): Bernoulli(0.5) margins, correlation 0.7 -> P(1,1) = P(0,0) = 0.25 + 0.7 / 4
    const double p_same = 0.25 + 0.7 / 4.0;
    const double p_diff = 0.5 - p_same;

    Dataset data{synthetic_schema(), {}};
    data.records.reserve(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        const double z1 = normal(rng), z2 = normal(rng);
        const double x1 = z1, x2 = rho_normal * z1 + cross * z2;
        const double z5 = normal(rng), z6 = normal(rng);
        const double x5 = z5, x6 = rho_normal * z5 + cross * z6;

        const double u78 = uniform(rng);
        double x7, x8;
        if (u78 < p_same) {
            x7 = 1, x8 = 1;
        } else if (u78 < p_same + p_diff) {
            x7 = 1, x8 = 0;
        } else if (u78 < p_same + 2 * p_diff) {
            x7 = 0, x8 = 1;
        } else {
            x7 = 0, x8 = 0;
        }
        const double x3 = uniform(rng) < 0.5 ? 1 : 0;
        const double x10 = uniform(rng) < 0.5 ? 1 : 0;
        const double x4 = normal(rng);
        const double x9 = normal(rng);
        const double a = uniform(rng) < 0.5 ? 1 : 0;

        const double tau = synthetic_tau(x1, x2, x7, config.delta);
        const double fy = synthetic_outcome_score(x1, x2, x5, x6, x8);
        const double p_y = logistic_tail((a - 1.0) * tau + fy);
        const double y = uniform(rng) < p_y ? 1 : 0;
        const double c = config.collider_y_weight * y + config.collider_a_weight * a + config.noise_bound * uniform(rng);

        data.records.push_back({i, {a, x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, c, y, tau, true_ds(tau, fy)}});
    }
    return data;
}

Dag synthetic_dag() {
    std::vector<std::string> nodes{"A", "X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "X9", "X10", "Y", "C"};
    std::vector<Edge> edges{{"X1", "X2"}, {"X5", "X6"}, {"X7", "X8"}, {"A", "Y"},  {"X1", "Y"}, {"X2", "Y"}, {"X5", "Y"},
                            {"X6", "Y"},  {"X7", "Y"},  {"X8", "Y"},  {"A", "C"}, {"Y", "C"}};
    return Dag::from_edges(nodes, edges);
}

std::vector<std::string> synthetic_feature_names(bool include_collider) {
    std::vector<std::string> out{"A", "X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "X9", "X10"};
    if (include_collider) out.push_back("C");
    return out;
}

// ------------------------------------------------------------ discrete SCM

DiscreteScm::DiscreteScm(Dag dag, std::vector<std::size_t> domains, std::vector<std::vector<std::vector<double>>> cpts)
    : m_dag(std::move(dag)), m_domains(std::move(domains)), m_cpts(std::move(cpts)) {
    const auto n = m_dag.size();
    if (m_domains.size() != n || m_cpts.size() != n) throw ValidationError("SCM needs one domain and one CPT per node");
    for (std::size_t v = 0; v < n; ++v) {
        if (m_domains[v] < 1) throw ValidationError("node '" + m_dag.name(v) + "' has an empty domain");
        std::size_t rows = 1;
        for (auto p : m_dag.parents_of(v)) rows *= m_domains[p];
        if (m_cpts[v].size() != rows) {
            throw ValidationError("CPT of '" + m_dag.name(v) + "' has " + std::to_string(m_cpts[v].size()) +
                                  " rows, expected " + std::to_string(rows));
        }
        for (const auto& row : m_cpts[v]) {
            if (row.size() != m_domains[v]) throw ValidationError("CPT row width of '" + m_dag.name(v) + "' != domain size");
            double total = 0.0;
            for (double p : row) {
                if (!(p >= 0.0)) throw ValidationError("negative CPT entry for '" + m_dag.name(v) + "'");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9) throw ValidationError("CPT row of '" + m_dag.name(v) + "' does not sum to 1");
        }
    }
}

std::size_t DiscreteScm::parent_row(std::size_t node, std::span<const int> state) const {
    std::size_t row = 0;
    for (auto p : m_dag.parents_of(node)) row = row * m_domains[p] + static_cast<std::size_t>(state[p]);
    return row;
}

double DiscreteScm::probability(std::size_t node, std::span<const int> state) const {
    return m_cpts[node][parent_row(node, state)][static_cast<std::size_t>(state[node])];
}

Schema DiscreteScm::schema(const AuditRoles& roles) const {
    std::vector<Attribute> attrs;
    for (std::size_t v = 0; v < m_dag.size(); ++v) {
        Attribute a{m_dag.name(v), AttributeKind::binary, {}};
        if (m_domains[v] != 2) {
            a.kind = AttributeKind::categorical;
            for (std::size_t k = 0; k < m_domains[v]; ++k) a.levels.push_back(std::to_string(k));
        }
        attrs.push_back(std::move(a));
    }
    return Schema(std::move(attrs), roles);
}

std::size_t DiscreteScm::state_space() const {
    std::size_t total = 1;
    for (auto d : m_domains) {
        if (total > std::numeric_limits<std::size_t>::max() / d) return std::numeric_limits<std::size_t>::max();
        total *= d;
    }
    return total;
}

std::string DiscreteScm::to_json() const {
    json doc;
    doc["nodes"] = json::array();
    for (std::size_t v = 0; v < m_dag.size(); ++v) {
        std::vector<std::string> ps;
        for (auto p : m_dag.parents_of(v)) ps.push_back(m_dag.name(p));
        doc["nodes"].push_back({{"name", m_dag.name(v)}, {"domain", m_domains[v]}, {"parents", ps}, {"cpt", m_cpts[v]}});
    }
    return doc.dump(2);
}

DiscreteScm DiscreteScm::from_json(std::string_view text) {
    try {
        const auto doc = json::parse(text);
        std::vector<std::string> names;
        std::vector<Edge> edges;
        std::vector<std::size_t> domains;
        std::vector<std::vector<std::vector<double>>> cpts;
        for (const auto& n : doc.at("nodes")) names.push_back(n.at("name").get<std::string>());
        for (const auto& n : doc.at("nodes")) {
            const auto child = n.at("name").get<std::string>();
            for (const auto& p : n.value("parents", std::vector<std::string>{})) edges.emplace_back(p, child);
            domains.push_back(n.at("domain").get<std::size_t>());
            cpts.push_back(n.at("cpt").get<std::vector<std::vector<double>>>());
        }
        return DiscreteScm(Dag::from_edges(names, edges), std::move(domains), std::move(cpts));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid SCM JSON: ") + e.what());
    }
}

Dataset scm_sample(const DiscreteScm& scm, std::size_t n, std::uint64_t seed, const AuditRoles& roles) {
    return scm_intervene_sample(scm, {}, n, seed, roles);
}

Dataset scm_intervene_sample(const DiscreteScm& scm, const Intervention& interventions, std::size_t n,
                             std::uint64_t seed, const AuditRoles& roles) {
    check_interventions(scm, interventions);
    const auto& dag = scm.dag();
    std::vector<int> pinned(dag.size(), -1);
    for (const auto& [name, value] : interventions) pinned[dag.require(name)] = value;

    std::mt19937_64 rng(seed);
    Dataset data{scm.schema(roles), {}};
    data.records.reserve(n);
    std::vector<int> state(dag.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto v : dag.topological_order()) {
            state[v] = pinned[v] >= 0 ? pinned[v]
                                      : static_cast<int>(sample_index(rng, scm.cpt(v)[scm.parent_row(v, state)]));
        }
        data.records.push_back({i, std::vector<double>(state.begin(), state.end())});
    }
    return data;
}

std::vector<double> exact_joint(const DiscreteScm& scm, const Intervention& interventions) {
    check_interventions(scm, interventions);
    const auto total = scm.state_space();
    if (total > kMaxEnumeratedStates) {
        throw ValidationError("state space of " + std::to_string(total) + " exceeds the enumeration limit");
    }
    const auto& dag = scm.dag();
    std::vector<int> pinned(dag.size(), -1);
    for (const auto& [name, value] : interventions) pinned[dag.require(name)] = value;

    std::vector<double> joint(total);
    std::vector<int> state(dag.size(), 0);
    for (std::size_t s = 0; s < total; ++s) {
        double p = 1.0;
        for (std::size_t v = 0; v < dag.size() && p > 0.0; ++v) {
            p *= pinned[v] >= 0 ? (state[v] == pinned[v] ? 1.0 : 0.0) : scm.probability(v, state);
        }
        joint[s] = p;
        // increment mixed-radix counter, last node fastest
        for (std::size_t v = dag.size(); v-- > 0;) {
            if (++state[v] < static_cast<int>(scm.domains()[v])) break;
            state[v] = 0;
        }
    }
    return joint;
}

double exact_probability(const DiscreteScm& scm, const std::string& target, int value, const Intervention& evidence,
                         const Intervention& interventions) {
    const auto& dag = scm.dag();
    const auto t = dag.require(target);
    check_interventions(scm, evidence);
    std::vector<std::pair<std::size_t, int>> ev;
    for (const auto& [name, v] : evidence) ev.emplace_back(dag.require(name), v);

    const auto joint = exact_joint(scm, interventions);
    std::vector<int> state(dag.size(), 0);
    double num = 0.0, den = 0.0;
    for (double p : joint) {
        bool match = true;
        for (const auto& [idx, v] : ev) match = match && state[idx] == v;
        if (match) {
            den += p;
            if (state[t] == value) num += p;
        }
        for (std::size_t v = dag.size(); v-- > 0;) {
            if (++state[v] < static_cast<int>(scm.domains()[v])) break;
            state[v] = 0;
        }
    }
    if (den <= 0.0) throw ValidationError("conditioning event has zero probability");
    return num / den;
}

double oracle_direct_effect(const DiscreteScm& scm, const AuditRoles& roles, const Intervention& b_values) {
    roles.check_against(scm.dag());
    if (b_values.count(roles.protected_attribute) || b_values.count(roles.outcome)) {
        throw ValidationError("b_values must not set the protected attribute or the outcome");
    }
    double p[2];
    for (int a = 0; a < 2; ++a) {
        Intervention doing = b_values;
        doing[roles.protected_attribute] = a;
        p[a] = exact_probability(scm, roles.outcome, 1, {}, doing);
    }
    return p[1] - p[0];
}

DiscreteScm random_discrete_scm(std::size_t nodes, double edge_probability, std::size_t max_domain, std::uint64_t seed,
                                const std::vector<std::string>& names) {
    if (nodes == 0) throw ValidationError("SCM needs at least one node");
    if (max_domain < 2) throw ValidationError("max_domain must be at least 2");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::vector<std::string> labels = names;
    if (labels.empty()) {
        for (std::size_t i = 0; i < nodes; ++i) labels.push_back("V" + std::to_string(i));
    }
    if (labels.size() != nodes) throw ValidationError("need one name per node");

    std::vector<Edge> edges;
    for (std::size_t j = 0; j < nodes; ++j) {
        for (std::size_t i = 0; i < j; ++i) {
            if (uniform(rng) < edge_probability) edges.emplace_back(labels[i], labels[j]);
        }
    }
    auto dag = Dag::from_edges(labels, edges);
    std::vector<std::size_t> domains(nodes);
    for (auto& d : domains) d = 2 + static_cast<std::size_t>(uniform(rng) * static_cast<double>(max_domain - 1));
    for (auto& d : domains) d = std::min(d, max_domain);

    std::vector<std::vector<std::vector<double>>> cpts(nodes);
    for (std::size_t v = 0; v < nodes; ++v) {
        std::size_t rows = 1;
        for (auto p : dag.parents_of(v)) rows *= domains[p];
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> row(domains[v]);
            double total = 0.0;
            for (auto& x : row) {
                x = 0.05 + uniform(rng);
                total += x;
            }
            for (auto& x : row) x /= total;
            cpts[v].push_back(std::move(row));
        }
    }
    return DiscreteScm(std::move(dag), std::move(domains), std::move(cpts));
}

}  // namespace ust
