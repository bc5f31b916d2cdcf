#ifndef UST_DATASET_HPP
#define UST_DATASET_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ust/causal_graph.hpp"
#include "ust/errors.hpp"

namespace ust {

enum class AttributeKind { binary, categorical, continuous };

std::string_view to_string(AttributeKind kind);
AttributeKind attribute_kind_from_string(std::string_view s);

struct Attribute {
    std::string name;
    AttributeKind kind = AttributeKind::continuous;
    std::vector<std::string> levels;  // categorical only

    bool discrete() const { return kind != AttributeKind::continuous; }
    /// Number of admissible values for discrete kinds, 0 for continuous.
    std::size_t cardinality() const;
};

/// Ordered attribute list plus the audit roles. Protected attribute and
/// outcome, when set, must be binary attributes.
class Schema {
public:
    Schema() = default;
    Schema(std::vector<Attribute> attributes, AuditRoles roles);

    const std::vector<Attribute>& attributes() const { return m_attributes; }
    const AuditRoles& roles() const { return m_roles; }
    std::size_t size() const { return m_attributes.size(); }

    std::optional<std::size_t> index_of(std::string_view name) const;
    std::size_t require(std::string_view name) const;
    const Attribute& attribute(std::string_view name) const { return m_attributes[require(name)]; }

    std::size_t protected_index() const { return require(m_roles.protected_attribute); }
    std::size_t outcome_index() const { return require(m_roles.outcome); }

    /// Every attribute named in `names` must be a DAG node; roles must agree.
    void check_against(const Dag& dag, const NodeSet& names) const;

    /// Throws DataError if `value` is not admissible for attribute `index`.
    void check_value(std::size_t index, double value) const;

    std::string to_json() const;
    static Schema from_json(std::string_view text);

private:
    std::vector<Attribute> m_attributes;
    AuditRoles m_roles;
};

/// One row. `values` is aligned with the schema: 0/1 for binary, the level
/// index for categorical, the raw number for continuous.
struct Record {
    std::size_t id = 0;
    std::vector<double> values;
};

struct Dataset {
    Schema schema;
    std::vector<Record> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    std::vector<double> column(std::string_view name) const;
    double value(const Record& r, std::string_view name) const { return r.values[schema.require(name)]; }

    /// Rows [begin, end) with ids renumbered from 0.
    Dataset slice(std::size_t begin, std::size_t end) const;
    /// Same rows restricted to the named columns (in the given order).
    Dataset select(const std::vector<std::string>& columns) const;
};

/// First `fraction` of the rows (file order) and the remainder.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction);

/// RFC-4180 subset: comma separated, optional double-quoted fields with ""
/// escapes, header row required.
std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text);

Dataset load_csv(std::string_view text, const Schema& schema);

/// Infers kinds from the data: columns holding only 0/1 are binary, numeric
/// columns continuous, anything else categorical with sorted levels.
Dataset load_csv_infer(std::string_view text, const AuditRoles& roles);

std::string to_csv(const Dataset& data);

/// Shortest decimal form that reads back to the same double.
std::string format_number(double v);

struct Binning {
    std::vector<double> edges;  // bins + 1 increasing boundaries
    std::vector<double> reps;   // representative (within-bin mean) per bin

    std::size_t bin_of(double v) const;
};

struct SupportPoint {
    std::vector<double> values;
    double probability = 0.0;
};

/// Finite distribution over tuples of variable values, P(c) in the
/// marginalisation. Continuous variables appear through their bin
/// representatives.
class EmpiricalJointDistribution {
public:
    EmpiricalJointDistribution() : m_support{{{}, 1.0}} {}
    EmpiricalJointDistribution(std::vector<std::string> variables, std::map<std::string, Binning> binning,
                               std::vector<SupportPoint> support, double tolerance = 1e-9);

    const std::vector<std::string>& variables() const { return m_variables; }
    const std::map<std::string, Binning>& binning() const { return m_binning; }
    const std::vector<SupportPoint>& support() const { return m_support; }
    std::size_t support_size() const { return m_support.size(); }

    /// Expected value of the i-th variable.
    double expectation(std::size_t i) const;
    /// Probability mass of the tuple, 0 when absent.
    double probability_of(std::span<const double> tuple) const;

    std::string to_json() const;

private:
    std::vector<std::string> m_variables;
    std::map<std::string, Binning> m_binning;
    std::vector<SupportPoint> m_support;
};

/// Joint support tuples beyond this count switch fitting to the product of
/// per-variable marginals.
inline constexpr std::size_t kMaxJointSupport = 10'000;
/// Upper bound on the support of a product-of-marginals fallback.
inline constexpr std::size_t kMaxProductSupport = 1'000'000;

/// Relative-frequency table over `variables`. Continuous variables are cut
/// into `bins` equal-frequency bins whose representative is the within-bin
/// mean; tied values never straddle a cut. An empty variable list yields the
/// single empty tuple with probability 1.
EmpiricalJointDistribution fit_distribution(const Dataset& data, const std::vector<std::string>& variables,
                                            std::size_t bins = 10, std::vector<std::string>* warnings = nullptr);

EmpiricalJointDistribution load_distribution(std::string_view text);

/// Family of distributions over `variables`, one per value tuple of discrete
/// `conditioning` variables: P(c | stratum).
class ConditionalJointDistribution {
public:
    ConditionalJointDistribution() = default;
    ConditionalJointDistribution(std::vector<std::string> conditioning, std::vector<std::string> variables,
                                 std::map<std::vector<double>, EmpiricalJointDistribution> strata);

    const std::vector<std::string>& conditioning() const { return m_conditioning; }
    const std::vector<std::string>& variables() const { return m_variables; }
    const std::map<std::vector<double>, EmpiricalJointDistribution>& strata() const { return m_strata; }

    /// Throws DataError for a stratum that was never observed.
    const EmpiricalJointDistribution& given(const std::vector<double>& key) const;

private:
    std::vector<std::string> m_conditioning;
    std::vector<std::string> m_variables;
    std::map<std::vector<double>, EmpiricalJointDistribution> m_strata;
};

ConditionalJointDistribution fit_conditional_distribution(const Dataset& data,
                                                          const std::vector<std::string>& conditioning,
                                                          const std::vector<std::string>& variables,
                                                          std::size_t bins = 10);

}  // namespace ust

#endif  // UST_DATASET_HPP
