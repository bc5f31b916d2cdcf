#include "ust/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ust {

namespace {

using json = nlohmann::json;

std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string cell_context(std::size_t row, const std::string& column) {
    return "row " + std::to_string(row) + ", column '" + column + "'";
}

// Converts one raw CSV cell according to the attribute kind.
double convert_cell(const Attribute& attr, const std::string& cell, std::size_t row) {
    if (cell.empty()) throw DataError(cell_context(row, attr.name) + ": missing value");
    switch (attr.kind) {
        case AttributeKind::binary: {
            const auto v = parse_number(cell);
            if (!v || (*v != 0.0 && *v != 1.0)) {
                throw DataError(cell_context(row, attr.name) + ": expected 0 or 1, got '" + cell + "'");
            }
            return *v;
        }
        case AttributeKind::categorical: {
            const auto it = std::find(attr.levels.begin(), attr.levels.end(), cell);
            if (it == attr.levels.end()) {
                throw DataError(cell_context(row, attr.name) + ": unseen categorical level '" + cell + "'");
            }
            return static_cast<double>(it - attr.levels.begin());
        }
        case AttributeKind::continuous: {
            const auto v = parse_number(cell);
            if (!v) throw DataError(cell_context(row, attr.name) + ": cannot parse '" + cell + "' as a number");
            return *v;
        }
    }
    return 0.0;
}

// Equal-frequency cut of one column. `bin_index` receives the bin of each row.
Binning equal_frequency_bins(const std::vector<double>& values, std::size_t bins, std::vector<std::size_t>& bin_index) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });

    std::vector<std::size_t> cuts{0};
    for (std::size_t k = 1; k < bins; ++k) {
        auto p = static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(n) / static_cast<double>(bins)));
        while (p < n && p > 0 && values[order[p]] == values[order[p - 1]]) ++p;
        if (p > cuts.back() && p < n) cuts.push_back(p);
    }
    cuts.push_back(n);

    Binning binning;
    bin_index.assign(n, 0);
    binning.edges.push_back(values[order.front()]);
    for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
        double sum = 0.0;
        for (std::size_t r = cuts[b]; r < cuts[b + 1]; ++r) {
            sum += values[order[r]];
            bin_index[order[r]] = b;
        }
        binning.reps.push_back(sum / static_cast<double>(cuts[b + 1] - cuts[b]));
        if (cuts[b + 1] < n) {
            binning.edges.push_back(0.5 * (values[order[cuts[b + 1] - 1]] + values[order[cuts[b + 1]]]));
        }
    }
    binning.edges.push_back(values[order.back()]);
    return binning;
}

}  // namespace

std::string_view to_string(AttributeKind kind) {
    switch (kind) {
        case AttributeKind::binary: return "binary";
        case AttributeKind::categorical: return "categorical";
        case AttributeKind::continuous: return "continuous";
    }
    return "?";
}

AttributeKind attribute_kind_from_string(std::string_view s) {
    if (s == "binary") return AttributeKind::binary;
    if (s == "categorical") return AttributeKind::categorical;
    if (s == "continuous") return AttributeKind::continuous;
    throw DataError("unknown attribute kind '" + std::string(s) + "'");
}

std::size_t Attribute::cardinality() const {
    switch (kind) {
        case AttributeKind::binary: return 2;
        case AttributeKind::categorical: return levels.size();
        case AttributeKind::continuous: return 0;
    }
    return 0;
}

Schema::Schema(std::vector<Attribute> attributes, AuditRoles roles)
    : m_attributes(std::move(attributes)), m_roles(std::move(roles)) {
    std::set<std::string> seen;
    for (const auto& a : m_attributes) {
        if (a.name.empty()) throw DataError("attribute with empty name");
        if (!seen.insert(a.name).second) throw DataError("duplicate attribute '" + a.name + "'");
        if (a.kind == AttributeKind::categorical) {
            if (a.levels.empty()) throw DataError("categorical attribute '" + a.name + "' declares no levels");
            if (std::set<std::string>(a.levels.begin(), a.levels.end()).size() != a.levels.size()) {
                throw DataError("categorical attribute '" + a.name + "' repeats a level");
            }
        }
    }
    for (const auto* role : {&m_roles.protected_attribute, &m_roles.outcome}) {
        if (role->empty()) continue;
        const auto i = index_of(*role);
        if (!i) throw DataError("role attribute '" + *role + "' is not in the schema");
        if (m_attributes[*i].kind != AttributeKind::binary) {
            throw DataError("role attribute '" + *role + "' must be binary, found " +
                            std::string(to_string(m_attributes[*i].kind)));
        }
    }
    if (!m_roles.protected_attribute.empty() && m_roles.protected_attribute == m_roles.outcome) {
        throw DataError("protected attribute and outcome must differ");
    }
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < m_attributes.size(); ++i) {
        if (m_attributes[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t Schema::require(std::string_view name) const {
    if (auto i = index_of(name)) return *i;
    throw DataError("attribute '" + std::string(name) + "' is not in the schema");
}

void Schema::check_against(const Dag& dag, const NodeSet& names) const {
    for (const auto& n : names) {
        if (!dag.contains(n)) throw ValidationError("attribute '" + n + "' does not appear in the DAG");
    }
    m_roles.check_against(dag);
}

void Schema::check_value(std::size_t index, double value) const {
    const auto& attr = m_attributes.at(index);
    if (!std::isfinite(value)) throw DataError("non-finite value for '" + attr.name + "'");
    if (!attr.discrete()) return;
    if (value != std::floor(value) || value < 0 || value >= static_cast<double>(attr.cardinality())) {
        throw DataError("value " + format_number(value) + " is outside the domain of '" + attr.name + "'");
    }
}

std::string Schema::to_json() const {
    json doc;
    doc["attributes"] = json::array();
    for (const auto& a : m_attributes) {
        json attr{{"name", a.name}, {"kind", std::string(to_string(a.kind))}};
        if (a.kind == AttributeKind::categorical) attr["levels"] = a.levels;
        doc["attributes"].push_back(attr);
    }
    if (!m_roles.protected_attribute.empty()) doc["protected"] = m_roles.protected_attribute;
    if (!m_roles.outcome.empty()) doc["outcome"] = m_roles.outcome;
    return doc.dump(2);
}

Schema Schema::from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
        std::vector<Attribute> attrs;
        for (const auto& a : doc.at("attributes")) {
            Attribute attr;
            attr.name = a.at("name").get<std::string>();
            attr.kind = attribute_kind_from_string(a.at("kind").get<std::string>());
            if (a.contains("levels")) attr.levels = a["levels"].get<std::vector<std::string>>();
            attrs.push_back(std::move(attr));
        }
        AuditRoles roles{doc.value("protected", std::string{}), doc.value("outcome", std::string{})};
        return Schema(std::move(attrs), std::move(roles));
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid schema JSON: ") + e.what());
    }
}

std::vector<double> Dataset::column(std::string_view name) const {
    const auto i = schema.require(name);
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.values[i]);
    return out;
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, records.size());
    Dataset out{schema, {}};
    for (std::size_t i = begin; i < end; ++i) {
        out.records.push_back({i - begin, records[i].values});
    }
    return out;
}

Dataset Dataset::select(const std::vector<std::string>& columns) const {
    std::vector<Attribute> attrs;
    std::vector<std::size_t> idx;
    for (const auto& c : columns) {
        idx.push_back(schema.require(c));
        attrs.push_back(schema.attributes()[idx.back()]);
    }
    AuditRoles roles;
    for (const auto& c : columns) {
        if (c == schema.roles().protected_attribute) roles.protected_attribute = c;
        if (c == schema.roles().outcome) roles.outcome = c;
    }
    Dataset out{Schema(std::move(attrs), std::move(roles)), {}};
    out.records.reserve(records.size());
    for (const auto& r : records) {
        Record row{r.id, {}};
        row.values.reserve(idx.size());
        for (auto i : idx) row.values.push_back(r.values[i]);
        out.records.push_back(std::move(row));
    }
    return out;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("split fraction must lie in (0, 1)");
    const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
    return {data.slice(0, cut), data.slice(cut, data.size())};
}

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool cell_started = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                cell += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!cell.empty()) throw DataError("CSV line " + std::to_string(line) + ": stray quote inside a field");
                in_quotes = true;
                cell_started = true;
                break;
            case ',':
                row.push_back(std::move(cell));
                cell.clear();
                cell_started = true;
                break;
            case '\r': break;
            case '\n':
                if (cell_started || !cell.empty() || !row.empty()) {
                    row.push_back(std::move(cell));
                    rows.push_back(std::move(row));
                }
                cell.clear();
                row.clear();
                cell_started = false;
                ++line;
                break;
            default:
                cell += c;
                cell_started = true;
        }
    }
    if (in_quotes) throw DataError("CSV: unterminated quoted field");
    if (cell_started || !cell.empty() || !row.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

Dataset load_csv(std::string_view text, const Schema& schema) {
    const auto rows = parse_csv_rows(text);
    if (rows.empty()) throw DataError("CSV has no header row");
    const auto& header = rows.front();

    // column position of each schema attribute
    std::vector<std::size_t> position(schema.size());
    for (std::size_t a = 0; a < schema.size(); ++a) {
        const auto& name = schema.attributes()[a].name;
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("CSV is missing column '" + name + "'");
        position[a] = static_cast<std::size_t>(it - header.begin());
    }

    Dataset data{schema, {}};
    data.records.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw DataError("row " + std::to_string(r - 1) + ": expected " + std::to_string(header.size()) +
                            " fields, found " + std::to_string(row.size()));
        }
        Record rec{r - 1, std::vector<double>(schema.size())};
        for (std::size_t a = 0; a < schema.size(); ++a) {
            rec.values[a] = convert_cell(schema.attributes()[a], row[position[a]], r - 1);
        }
        data.records.push_back(std::move(rec));
    }
    return data;
}

Dataset load_csv_infer(std::string_view text, const AuditRoles& roles) {
    const auto rows = parse_csv_rows(text);
    if (rows.empty()) throw DataError("CSV has no header row");
    const auto& header = rows.front();
    std::vector<Attribute> attrs;
    for (std::size_t c = 0; c < header.size(); ++c) {
        Attribute attr{header[c], AttributeKind::binary, {}};
        bool numeric = true;
        bool binary = true;
        std::set<std::string> levels;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (c >= rows[r].size()) continue;  // reported by load_csv
            const auto& cell = rows[r][c];
            if (cell.empty()) continue;
            levels.insert(cell);
            const auto v = parse_number(cell);
            if (!v) numeric = binary = false;
            else if (*v != 0.0 && *v != 1.0) binary = false;
        }
        if (binary) {
            attr.kind = AttributeKind::binary;
        } else if (numeric) {
            attr.kind = AttributeKind::continuous;
        } else {
            attr.kind = AttributeKind::categorical;
            attr.levels.assign(levels.begin(), levels.end());
        }
        attrs.push_back(std::move(attr));
    }
    return load_csv(text, Schema(std::move(attrs), roles));
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string to_csv(const Dataset& data) {
    std::string out;
    const auto& attrs = data.schema.attributes();
    for (std::size_t a = 0; a < attrs.size(); ++a) {
        if (a) out += ',';
        out += csv_escape(attrs[a].name);
    }
    out += '\n';
    for (const auto& r : data.records) {
        for (std::size_t a = 0; a < attrs.size(); ++a) {
            if (a) out += ',';
            if (attrs[a].kind == AttributeKind::categorical) {
                out += csv_escape(attrs[a].levels.at(static_cast<std::size_t>(r.values[a])));
            } else {
                out += format_number(r.values[a]);
            }
        }
        out += '\n';
    }
    return out;
}

std::size_t Binning::bin_of(double v) const {
    if (reps.empty()) throw DataError("empty binning");
    // inner edges are edges[1 .. size-2]
    std::size_t b = 0;
    while (b + 1 < reps.size() && v > edges[b + 1]) ++b;
    return b;
}

EmpiricalJointDistribution::EmpiricalJointDistribution(std::vector<std::string> variables,
                                                       std::map<std::string, Binning> binning,
                                                       std::vector<SupportPoint> support, double tolerance)
    : m_variables(std::move(variables)), m_binning(std::move(binning)), m_support(std::move(support)) {
    if (std::set<std::string>(m_variables.begin(), m_variables.end()).size() != m_variables.size()) {
        throw DataError("distribution lists a variable twice");
    }
    for (const auto& [name, b] : m_binning) {
        if (std::find(m_variables.begin(), m_variables.end(), name) == m_variables.end()) {
            throw DataError("binning given for unknown variable '" + name + "'");
        }
        if (b.reps.empty() || b.edges.size() != b.reps.size() + 1) {
            throw DataError("binning of '" + name + "' needs one more edge than representatives");
        }
        if (!std::is_sorted(b.edges.begin(), b.edges.end())) {
            throw DataError("binning edges of '" + name + "' are not increasing");
        }
    }
    if (m_support.empty()) throw DataError("distribution has empty support");
    double total = 0.0;
    std::set<std::vector<double>> seen;
    for (const auto& p : m_support) {
        if (p.values.size() != m_variables.size()) {
            throw DataError("support tuple has arity " + std::to_string(p.values.size()) + ", expected " +
                            std::to_string(m_variables.size()));
        }
        if (!(p.probability >= 0.0) || !std::isfinite(p.probability)) throw DataError("negative probability in support");
        if (!seen.insert(p.values).second) throw DataError("duplicate support tuple");
        total += p.probability;
    }
    if (std::abs(total - 1.0) > tolerance) {
        throw DataError("support probabilities sum to " + format_number(total) + ", not 1");
    }
}

double EmpiricalJointDistribution::expectation(std::size_t i) const {
    double e = 0.0;
    for (const auto& p : m_support) e += p.probability * p.values.at(i);
    return e;
}

double EmpiricalJointDistribution::probability_of(std::span<const double> tuple) const {
    for (const auto& p : m_support) {
        if (std::equal(p.values.begin(), p.values.end(), tuple.begin(), tuple.end())) return p.probability;
    }
    return 0.0;
}

std::string EmpiricalJointDistribution::to_json() const {
    json doc;
    doc["variables"] = m_variables;
    doc["binning"] = json::object();
    for (const auto& [name, b] : m_binning) doc["binning"][name] = {{"edges", b.edges}, {"reps", b.reps}};
    doc["support"] = json::array();
    for (const auto& p : m_support) doc["support"].push_back(json::array({p.values, p.probability}));
    return doc.dump();
}

EmpiricalJointDistribution fit_distribution(const Dataset& data, const std::vector<std::string>& variables,
                                            std::size_t bins, std::vector<std::string>* warnings) {
    if (data.empty()) throw DataError("cannot fit a distribution to an empty dataset");
    if (variables.empty()) return {};
    if (bins == 0) throw ValidationError("bin count must be positive");

    const std::size_t n = data.size();
    std::map<std::string, Binning> binning;
    // per variable, the (possibly binned) value of each row
    std::vector<std::vector<double>> columns;
    for (const auto& v : variables) {
        auto col = data.column(v);
        if (!data.schema.attribute(v).discrete()) {
            std::vector<std::size_t> idx;
            auto b = equal_frequency_bins(col, bins, idx);
            for (std::size_t r = 0; r < n; ++r) col[r] = b.reps[idx[r]];
            binning.emplace(v, std::move(b));
        }
        columns.push_back(std::move(col));
    }

    std::map<std::vector<double>, std::size_t> counts;
    std::vector<double> tuple(variables.size());
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < variables.size(); ++j) tuple[j] = columns[j][r];
        ++counts[tuple];
    }

    std::vector<SupportPoint> support;
    if (counts.size() <= kMaxJointSupport) {
        support.reserve(counts.size());
        for (const auto& [t, c] : counts) support.push_back({t, static_cast<double>(c) / static_cast<double>(n)});
        return {variables, std::move(binning), std::move(support)};
    }

    // Product of marginals.
    std::vector<std::vector<std::pair<double, double>>> marginals;
    std::size_t product = 1;
    for (const auto& col : columns) {
        std::map<double, std::size_t> m;
        for (double v : col) ++m[v];
        std::vector<std::pair<double, double>> pm;
        for (const auto& [v, c] : m) pm.emplace_back(v, static_cast<double>(c) / static_cast<double>(n));
        product *= pm.size();
        if (product > kMaxProductSupport) {
            throw DataError("collider support too large even as a product of marginals (> " +
                            std::to_string(kMaxProductSupport) + " tuples); reduce variables or bins");
        }
        marginals.push_back(std::move(pm));
    }
    if (warnings) {
        warnings->push_back("joint support has " + std::to_string(counts.size()) + " tuples (> " +
                            std::to_string(kMaxJointSupport) + "); using the product of marginals");
    }
    std::vector<std::size_t> digit(marginals.size(), 0);
    support.reserve(product);
    for (std::size_t k = 0; k < product; ++k) {
        SupportPoint p{std::vector<double>(marginals.size()), 1.0};
        for (std::size_t j = 0; j < marginals.size(); ++j) {
            p.values[j] = marginals[j][digit[j]].first;
            p.probability *= marginals[j][digit[j]].second;
        }
        support.push_back(std::move(p));
        for (std::size_t j = marginals.size(); j-- > 0;) {
            if (++digit[j] < marginals[j].size()) break;
            digit[j] = 0;
        }
    }
    return {variables, std::move(binning), std::move(support), 1e-6};
}

EmpiricalJointDistribution load_distribution(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("invalid distribution JSON: ") + e.what());
    }
    try {
        auto variables = doc.at("variables").get<std::vector<std::string>>();
        std::map<std::string, Binning> binning;
        if (doc.contains("binning")) {
            for (const auto& [name, b] : doc["binning"].items()) {
                binning.emplace(name, Binning{b.at("edges").get<std::vector<double>>(), b.at("reps").get<std::vector<double>>()});
            }
        }
        std::vector<SupportPoint> support;
        for (const auto& entry : doc.at("support")) {
            if (!entry.is_array() || entry.size() != 2) throw DataError("support entries must be [tuple, probability]");
            support.push_back({entry[0].get<std::vector<double>>(), entry[1].get<double>()});
        }
        return {std::move(variables), std::move(binning), std::move(support), 1e-6};
    } catch (const json::exception& e) {
        throw DataError(std::string("invalid distribution JSON: ") + e.what());
    }
}

ConditionalJointDistribution::ConditionalJointDistribution(std::vector<std::string> conditioning,
                                                           std::vector<std::string> variables,
                                                           std::map<std::vector<double>, EmpiricalJointDistribution> strata)
    : m_conditioning(std::move(conditioning)), m_variables(std::move(variables)), m_strata(std::move(strata)) {
    for (const auto& [key, dist] : m_strata) {
        if (key.size() != m_conditioning.size()) throw DataError("stratum key arity does not match the conditioning set");
        if (dist.variables() != m_variables) throw DataError("stratum distribution has different variables");
    }
}

const EmpiricalJointDistribution& ConditionalJointDistribution::given(const std::vector<double>& key) const {
    const auto it = m_strata.find(key);
    if (it == m_strata.end()) {
        std::string k;
        for (double v : key) k += (k.empty() ? "" : ",") + format_number(v);
        throw DataError("no collider distribution for stratum (" + k + ")");
    }
    return it->second;
}

ConditionalJointDistribution fit_conditional_distribution(const Dataset& data,
                                                          const std::vector<std::string>& conditioning,
                                                          const std::vector<std::string>& variables,
                                                          std::size_t bins) {
    std::vector<std::size_t> idx;
    for (const auto& c : conditioning) {
        idx.push_back(data.schema.require(c));
        if (!data.schema.attributes()[idx.back()].discrete()) {
            throw DataError("conditioning variable '" + c + "' must be discrete");
        }
    }
    std::map<std::vector<double>, Dataset> groups;
    for (const auto& r : data.records) {
        std::vector<double> key;
        for (auto i : idx) key.push_back(r.values[i]);
        auto [it, fresh] = groups.try_emplace(key, Dataset{data.schema, {}});
        it->second.records.push_back(r);
    }
    std::map<std::vector<double>, EmpiricalJointDistribution> strata;
    for (const auto& [key, group] : groups) strata.emplace(key, fit_distribution(group, variables, bins));
    return {conditioning, variables, std::move(strata)};
}

}  // namespace ust
