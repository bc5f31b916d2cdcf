#ifndef UST_CAUSAL_GRAPH_HPP
#define UST_CAUSAL_GRAPH_HPP

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ust/errors.hpp"

namespace ust {

using NodeSet = std::set<std::string>;
using Edge = std::pair<std::string, std::string>;

/// Directed acyclic graph over named variables.
///
/// Nodes are kept in declaration order; the index of a node is stable for the
/// lifetime of the graph. A Dag can only be obtained through `from_edges` (or
/// the parsers built on it), so every instance is acyclic, has no self-loops
/// and no duplicate edges.
class Dag {
public:
    Dag() = default;

    static Dag from_edges(const std::vector<std::string>& nodes, const std::vector<Edge>& edges);

    std::size_t size() const { return m_names.size(); }
    const std::vector<std::string>& nodes() const { return m_names; }
    std::vector<Edge> edges() const;
    std::size_t edge_count() const;

    bool contains(std::string_view name) const { return index_of(name).has_value(); }
    std::optional<std::size_t> index_of(std::string_view name) const;
    /// Throws GraphError if the node does not exist.
    std::size_t require(std::string_view name) const;
    const std::string& name(std::size_t index) const { return m_names.at(index); }

    const std::vector<std::size_t>& parents_of(std::size_t index) const { return m_parents.at(index); }
    const std::vector<std::size_t>& children_of(std::size_t index) const { return m_children.at(index); }
    bool has_edge(std::size_t from, std::size_t to) const;

    const std::vector<std::size_t>& topological_order() const { return m_topo; }

    /// Nodes reachable from `index` along directed edges, excluding `index`.
    std::vector<bool> descendant_mask(std::size_t index) const;
    std::vector<bool> ancestor_mask(std::size_t index) const;

    /// Reachability-based d-separation test on node indices.
    ///
    /// `given` is a membership mask over nodes. x and y must not be in it.
    bool d_separated(std::size_t x, std::size_t y, const std::vector<bool>& given) const;

    std::string to_edge_list() const;
    std::string to_json() const;

private:
    std::vector<std::string> m_names;
    std::vector<std::vector<std::size_t>> m_parents;
    std::vector<std::vector<std::size_t>> m_children;
    std::vector<std::size_t> m_topo;
};

/// Parses the edge-list text format (`Parent -> Child`, one per line, `#`
/// comments, a bare name declares an isolated node) or, when the first
/// non-blank character is `{`, the JSON form
/// `{"nodes":[...], "edges":[["P","C"], ...]}`.
Dag parse_dag(std::string_view text);

bool is_valid_node_name(std::string_view name);

NodeSet parents(const Dag& dag, std::string_view node);
NodeSet children(const Dag& dag, std::string_view node);
NodeSet descendants(const Dag& dag, std::string_view node);
NodeSet ancestors(const Dag& dag, std::string_view node);

bool is_d_separated(const Dag& dag, std::string_view x, std::string_view y, const NodeSet& given);

struct AuditRoles {
    std::string protected_attribute;
    std::string outcome;

    /// Throws ValidationError unless both roles name distinct nodes of `dag`.
    void check_against(const Dag& dag) const;
};

/// Split of V \ {A, Y} used to build the unbiased conditioning set.
struct NodePartition {
    NodeSet antecedents;   // B: nodes with a directed path into Y, minus A
    NodeSet descendants;   // C: De(Y)
    NodeSet spouses;       // S: other parents of Y's children
    NodeSet irrelevant;    // I: everything else

    /// Members of antecedents that are parents of Y.
    NodeSet direct_causes;
};

NodePartition partition_nodes(const Dag& dag, const AuditRoles& roles);

struct DagValidationReport {
    bool acyclic = true;
    bool has_direct_edge = false;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    NodeSet colliders;
    NodeSet collider_descendants;

    bool ok() const { return errors.empty(); }
    std::string to_text() const;
    std::string to_json() const;
};

/// Never throws for graph content; problems are reported in the result.
DagValidationReport validate_for_audit(const Dag& dag, const AuditRoles& roles);

/// Parses `text` and validates it. Parse failures (including cycles) are
/// turned into report errors with `acyclic` set accordingly.
DagValidationReport validate_for_audit(std::string_view text, const AuditRoles& roles);

}  // namespace ust

#endif  // UST_CAUSAL_GRAPH_HPP
