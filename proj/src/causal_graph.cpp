#include "ust/causal_graph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ust {

namespace {

using json = nlohmann::json;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Incremental builder used by both parsers so that errors can carry the line
// that introduced them.
class DagBuilder {
public:
    void add_node(const std::string& name, std::size_t line) {
        if (!is_valid_node_name(name)) throw GraphError("invalid node name '" + name + "'", line);
        if (m_index.count(name)) return;
        m_index.emplace(name, m_names.size());
        m_names.push_back(name);
        m_children.emplace_back();
    }

    void add_edge(const std::string& from, const std::string& to, std::size_t line) {
        if (from == to) throw GraphError("self-loop on '" + from + "'", line);
        const std::size_t u = m_index.at(from);
        const std::size_t v = m_index.at(to);
        auto& kids = m_children[u];
        if (std::find(kids.begin(), kids.end(), v) != kids.end()) {
            throw GraphError("duplicate edge " + from + " -> " + to, line);
        }
        if (reaches(v, u)) throw GraphError("edge " + from + " -> " + to + " creates a cycle", line);
        kids.push_back(v);
        m_edges.emplace_back(from, to);
    }

    bool has_node(const std::string& name) const { return m_index.count(name) > 0; }

    Dag build() const { return Dag::from_edges(m_names, m_edges); }

private:
    bool reaches(std::size_t from, std::size_t to) const {
        std::vector<bool> seen(m_names.size(), false);
        std::vector<std::size_t> stack{from};
        while (!stack.empty()) {
            const auto n = stack.back();
            stack.pop_back();
            if (n == to) return true;
            if (seen[n]) continue;
            seen[n] = true;
            for (auto c : m_children[n]) stack.push_back(c);
        }
        return false;
    }

    std::map<std::string, std::size_t> m_index;
    std::vector<std::string> m_names;
    std::vector<std::vector<std::size_t>> m_children;
    std::vector<Edge> m_edges;
};

Dag parse_edge_list(std::string_view text) {
    DagBuilder builder;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        std::vector<std::string> chain;
        std::size_t start = 0;
        while (true) {
            const auto arrow = line.find("->", start);
            const auto piece = trim(line.substr(start, arrow == std::string_view::npos ? std::string_view::npos : arrow - start));
            if (piece.empty()) throw GraphError("syntax error: expected a node name", line_no);
            chain.emplace_back(piece);
            if (arrow == std::string_view::npos) break;
            start = arrow + 2;
        }
        for (const auto& name : chain) builder.add_node(name, line_no);
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) builder.add_edge(chain[i], chain[i + 1], line_no);
    }
    return builder.build();
}

Dag parse_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw GraphError(std::string("invalid DAG JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("edges") || !doc["edges"].is_array()) {
        throw GraphError("DAG JSON must be an object with an \"edges\" array");
    }
    DagBuilder builder;
    const bool declared = doc.contains("nodes");
    if (declared) {
        if (!doc["nodes"].is_array()) throw GraphError("\"nodes\" must be an array of names");
        for (const auto& n : doc["nodes"]) {
            if (!n.is_string()) throw GraphError("node names must be strings");
            builder.add_node(n.get<std::string>(), 0);
        }
    }
    std::size_t i = 0;
    for (const auto& e : doc["edges"]) {
        ++i;
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
            throw GraphError("edge #" + std::to_string(i) + " must be a [parent, child] pair of names");
        }
        const auto from = e[0].get<std::string>();
        const auto to = e[1].get<std::string>();
        for (const auto& n : {from, to}) {
            if (declared && !builder.has_node(n)) {
                throw GraphError("edge #" + std::to_string(i) + " references unknown node '" + n + "'");
            }
            builder.add_node(n, 0);
        }
        builder.add_edge(from, to, 0);
    }
    return builder.build();
}

NodeSet names_of(const Dag& dag, const std::vector<bool>& mask) {
    NodeSet out;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out.insert(dag.name(i));
    }
    return out;
}

std::string join(const NodeSet& s) {
    std::string out;
    for (const auto& n : s) {
        if (!out.empty()) out += ", ";
        out += n;
    }
    return out.empty() ? "(none)" : out;
}

}  // namespace

bool is_valid_node_name(std::string_view name) {
    if (name.empty()) return false;
    const auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
    if (!alpha(name.front())) return false;
    return std::all_of(name.begin() + 1, name.end(), [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

Dag Dag::from_edges(const std::vector<std::string>& nodes, const std::vector<Edge>& edges) {
    Dag dag;
    std::map<std::string, std::size_t, std::less<>> index;
    for (const auto& n : nodes) {
        if (!is_valid_node_name(n)) throw GraphError("invalid node name '" + n + "'");
        if (!index.emplace(n, dag.m_names.size()).second) throw GraphError("duplicate node '" + n + "'");
        dag.m_names.push_back(n);
    }
    dag.m_parents.resize(nodes.size());
    dag.m_children.resize(nodes.size());
    for (const auto& [from, to] : edges) {
        const auto u = index.find(from);
        const auto v = index.find(to);
        if (u == index.end()) throw GraphError("edge references unknown node '" + from + "'");
        if (v == index.end()) throw GraphError("edge references unknown node '" + to + "'");
        if (u->second == v->second) throw GraphError("self-loop on '" + from + "'");
        auto& kids = dag.m_children[u->second];
        if (std::find(kids.begin(), kids.end(), v->second) != kids.end()) {
            throw GraphError("duplicate edge " + from + " -> " + to);
        }
        kids.push_back(v->second);
        dag.m_parents[v->second].push_back(u->second);
    }

    // Kahn's algorithm; lowest index first keeps the order deterministic.
    std::vector<std::size_t> indegree(nodes.size());
    for (std::size_t v = 0; v < nodes.size(); ++v) indegree[v] = dag.m_parents[v].size();
    std::set<std::size_t> ready;
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        if (indegree[v] == 0) ready.insert(v);
    }
    while (!ready.empty()) {
        const auto v = *ready.begin();
        ready.erase(ready.begin());
        dag.m_topo.push_back(v);
        for (auto c : dag.m_children[v]) {
            if (--indegree[c] == 0) ready.insert(c);
        }
    }
    if (dag.m_topo.size() != nodes.size()) {
        std::string involved;
        for (std::size_t v = 0; v < nodes.size(); ++v) {
            if (indegree[v] > 0) involved += (involved.empty() ? "" : ", ") + dag.m_names[v];
        }
        throw GraphError("graph contains a directed cycle through: " + involved);
    }
    return dag;
}

std::vector<Edge> Dag::edges() const {
    std::vector<Edge> out;
    for (std::size_t u = 0; u < size(); ++u) {
        for (auto v : m_children[u]) out.emplace_back(m_names[u], m_names[v]);
    }
    return out;
}

std::size_t Dag::edge_count() const {
    std::size_t n = 0;
    for (const auto& kids : m_children) n += kids.size();
    return n;
}

std::optional<std::size_t> Dag::index_of(std::string_view name) const {
    const auto it = std::find(m_names.begin(), m_names.end(), name);
    if (it == m_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - m_names.begin());
}

std::size_t Dag::require(std::string_view name) const {
    if (auto i = index_of(name)) return *i;
    throw GraphError("unknown node '" + std::string(name) + "'");
}

bool Dag::has_edge(std::size_t from, std::size_t to) const {
    const auto& kids = m_children.at(from);
    return std::find(kids.begin(), kids.end(), to) != kids.end();
}

std::vector<bool> Dag::descendant_mask(std::size_t index) const {
    std::vector<bool> seen(size(), false);
    std::vector<std::size_t> stack(m_children.at(index).begin(), m_children.at(index).end());
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        if (seen[n]) continue;
        seen[n] = true;
        for (auto c : m_children[n]) stack.push_back(c);
    }
    return seen;
}

std::vector<bool> Dag::ancestor_mask(std::size_t index) const {
    std::vector<bool> seen(size(), false);
    std::vector<std::size_t> stack(m_parents.at(index).begin(), m_parents.at(index).end());
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        if (seen[n]) continue;
        seen[n] = true;
        for (auto p : m_parents[n]) stack.push_back(p);
    }
    return seen;
}

bool Dag::d_separated(std::size_t x, std::size_t y, const std::vector<bool>& given) const {
    const std::size_t n = size();
    if (x >= n || y >= n || given.size() != n) throw GraphError("d-separation query out of range");
    if (given[x] || given[y]) throw GraphError("conditioning set must not contain the queried nodes");
    if (x == y) return false;

    // Nodes that are in the conditioning set or have a descendant in it: a
    // collider on such a node is open.
    std::vector<bool> opens_collider(n, false);
    {
        std::vector<std::size_t> stack;
        for (std::size_t v = 0; v < n; ++v) {
            if (given[v]) stack.push_back(v);
        }
        while (!stack.empty()) {
            const auto v = stack.back();
            stack.pop_back();
            if (opens_collider[v]) continue;
            opens_collider[v] = true;
            for (auto p : m_parents[v]) stack.push_back(p);
        }
    }

    // Traversal over (node, arrived-from-child?) states. "Up" means we entered
    // the node against an edge direction (from one of its children), "down"
    // means we entered along an edge (from one of its parents).
    enum Dir : int { kUp = 0, kDown = 1 };
    std::vector<std::array<bool, 2>> visited(n, {false, false});
    std::deque<std::pair<std::size_t, Dir>> queue{{x, kUp}};
    while (!queue.empty()) {
        const auto [v, dir] = queue.front();
        queue.pop_front();
        if (visited[v][dir]) continue;
        visited[v][dir] = true;
        if (v == y) return false;

        if (dir == kUp) {
            if (given[v]) continue;
            for (auto p : m_parents[v]) queue.emplace_back(p, kUp);
            for (auto c : m_children[v]) queue.emplace_back(c, kDown);
        } else {
            if (!given[v]) {
                for (auto c : m_children[v]) queue.emplace_back(c, kDown);
            }
            if (opens_collider[v]) {
                for (auto p : m_parents[v]) queue.emplace_back(p, kUp);
            }
        }
    }
    return true;
}

std::string Dag::to_edge_list() const {
    std::ostringstream out;
    std::vector<bool> mentioned(size(), false);
    for (std::size_t u = 0; u < size(); ++u) {
        for (auto v : m_children[u]) {
            out << m_names[u] << " -> " << m_names[v] << '\n';
            mentioned[u] = mentioned[v] = true;
        }
    }
    for (std::size_t u = 0; u < size(); ++u) {
        if (!mentioned[u]) out << m_names[u] << '\n';
    }
    return out.str();
}

std::string Dag::to_json() const {
    json doc;
    doc["nodes"] = m_names;
    doc["edges"] = json::array();
    for (const auto& [from, to] : edges()) doc["edges"].push_back({from, to});
    return doc.dump(2);
}

Dag parse_dag(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') return parse_json(text);
    return parse_edge_list(text);
}

NodeSet parents(const Dag& dag, std::string_view node) {
    NodeSet out;
    for (auto p : dag.parents_of(dag.require(node))) out.insert(dag.name(p));
    return out;
}

NodeSet children(const Dag& dag, std::string_view node) {
    NodeSet out;
    for (auto c : dag.children_of(dag.require(node))) out.insert(dag.name(c));
    return out;
}

NodeSet descendants(const Dag& dag, std::string_view node) {
    return names_of(dag, dag.descendant_mask(dag.require(node)));
}

NodeSet ancestors(const Dag& dag, std::string_view node) {
    return names_of(dag, dag.ancestor_mask(dag.require(node)));
}

bool is_d_separated(const Dag& dag, std::string_view x, std::string_view y, const NodeSet& given) {
    const auto xi = dag.require(x);
    const auto yi = dag.require(y);
    std::vector<bool> mask(dag.size(), false);
    for (const auto& z : given) mask[dag.require(z)] = true;
    if (mask[xi] || mask[yi]) {
        throw GraphError("conditioning set overlaps the queried pair {" + std::string(x) + ", " + std::string(y) + "}");
    }
    return dag.d_separated(xi, yi, mask);
}

void AuditRoles::check_against(const Dag& dag) const {
    if (protected_attribute.empty()) throw ValidationError("protected attribute is not set");
    if (outcome.empty()) throw ValidationError("outcome is not set");
    if (protected_attribute == outcome) {
        throw ValidationError("protected attribute and outcome must differ (both are '" + outcome + "')");
    }
    if (!dag.contains(protected_attribute)) {
        throw ValidationError("protected attribute '" + protected_attribute + "' is not a node of the DAG");
    }
    if (!dag.contains(outcome)) throw ValidationError("outcome '" + outcome + "' is not a node of the DAG");
}

NodePartition partition_nodes(const Dag& dag, const AuditRoles& roles) {
    roles.check_against(dag);
    const auto a = dag.require(roles.protected_attribute);
    const auto y = dag.require(roles.outcome);
    const auto desc = dag.descendant_mask(y);
    const auto anc = dag.ancestor_mask(y);

    std::vector<bool> spouse(dag.size(), false);
    for (auto child : dag.children_of(y)) {
        for (auto p : dag.parents_of(child)) spouse[p] = true;
    }

    NodePartition out;
    for (std::size_t v = 0; v < dag.size(); ++v) {
        if (v == a || v == y) continue;
        const auto& name = dag.name(v);
        if (desc[v]) {
            out.descendants.insert(name);
        } else if (anc[v]) {
            out.antecedents.insert(name);
            if (dag.has_edge(v, y)) out.direct_causes.insert(name);
        } else if (spouse[v]) {
            out.spouses.insert(name);
        } else {
            out.irrelevant.insert(name);
        }
    }
    return out;
}

DagValidationReport validate_for_audit(const Dag& dag, const AuditRoles& roles) {
    DagValidationReport report;
    try {
        roles.check_against(dag);
    } catch (const ValidationError& e) {
        report.errors.emplace_back(e.what());
        return report;
    }
    const auto a = dag.require(roles.protected_attribute);
    const auto y = dag.require(roles.outcome);
    report.has_direct_edge = dag.has_edge(a, y);
    if (!report.has_direct_edge) {
        report.warnings.push_back("no direct edge " + roles.protected_attribute + " -> " + roles.outcome +
                                  "; the policy graph implies no direct discrimination");
    }
    if (dag.has_edge(y, a)) {
        report.warnings.push_back("outcome " + roles.outcome + " is a parent of the protected attribute " +
                                  roles.protected_attribute);
    }

    std::vector<bool> collider_desc(dag.size(), false);
    for (auto c : dag.children_of(a)) {
        if (!dag.has_edge(y, c)) continue;
        report.colliders.insert(dag.name(c));
        const auto d = dag.descendant_mask(c);
        for (std::size_t v = 0; v < d.size(); ++v) collider_desc[v] = collider_desc[v] || d[v];
    }
    for (std::size_t v = 0; v < dag.size(); ++v) {
        if (collider_desc[v] && !report.colliders.count(dag.name(v))) report.collider_descendants.insert(dag.name(v));
    }
    if (!report.colliders.empty()) {
        report.warnings.push_back("collider(s) of " + roles.protected_attribute + " and " + roles.outcome + ": " +
                                  join(report.colliders) + "; conditioning on them biases the naive situation test");
    }
    return report;
}

DagValidationReport validate_for_audit(std::string_view text, const AuditRoles& roles) {
    Dag dag;
    try {
        dag = parse_dag(text);
    } catch (const GraphError& e) {
        DagValidationReport report;
        const std::string what = e.what();
        report.acyclic = what.find("cycle") == std::string::npos;
        report.errors.push_back(what);
        return report;
    }
    return validate_for_audit(dag, roles);
}

std::string DagValidationReport::to_text() const {
    std::ostringstream out;
    out << "status: " << (ok() ? "ok" : "invalid") << '\n';
    out << "acyclic: " << (acyclic ? "yes" : "no") << '\n';
    if (ok()) out << "direct edge A -> Y: " << (has_direct_edge ? "yes" : "no") << '\n';
    for (const auto& e : errors) out << "error: " << e << '\n';
    for (const auto& w : warnings) out << "warning: " << w << '\n';
    out << "colliders: " << join(colliders) << '\n';
    out << "collider descendants: " << join(collider_descendants) << '\n';
    return out.str();
}

std::string DagValidationReport::to_json() const {
    json doc;
    doc["acyclic"] = acyclic;
    doc["has_direct_edge"] = has_direct_edge;
    doc["errors"] = errors;
    doc["warnings"] = warnings;
    doc["colliders"] = std::vector<std::string>(colliders.begin(), colliders.end());
    doc["collider_descendants"] = std::vector<std::string>(collider_descendants.begin(), collider_descendants.end());
    return doc.dump(2);
}

}  // namespace ust
