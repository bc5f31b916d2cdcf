#include "ust/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace ust {

namespace {

using json = nlohmann::json;

constexpr double kQuantileLevels[] = {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0};

json result_json(const EvaluationResult& r) {
    json q = json::array();
    for (const auto& [level, v] : r.score_quantiles) q.push_back({{"q", level}, {"value", v}});
    return {{"method", std::string(to_string(r.method))},
            {"rmse", r.rmse},
            {"n", r.n},
            {"quantiles", q},
            {"histogram", {{"edges", r.histogram.edges}, {"counts", r.histogram.counts}}}};
}

std::string fixed(double v, int digits = 3) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::nst ? "NST" : "UST"; }

double rmse(std::span<const double> estimates, std::span<const double> truths) {
    if (estimates.size() != truths.size()) throw ValidationError("rmse: estimates and truths differ in length");
    if (estimates.empty()) throw ValidationError("rmse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const double d = estimates[i] - truths[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(estimates.size()));
}

EvaluationResult evaluate(Method method, std::span<const double> estimates, std::span<const double> truths) {
    EvaluationResult r;
    r.method = method;
    r.rmse = rmse(estimates, truths);
    r.n = estimates.size();
    r.score_quantiles = quantiles(estimates, kQuantileLevels);
    r.histogram = histogram(estimates, kHistogramBins, 0.0, 1.0);
    return r;
}

Comparison compare(const ClassifierModel& model, const Dataset& test_data, const AuditConfig& config,
                   std::span<const double> truths) {
    if (truths.size() != test_data.size()) {
        throw ValidationError("compare: " + std::to_string(truths.size()) + " truths for " +
                              std::to_string(test_data.size()) + " records");
    }
    const auto report = audit(model, test_data, config);
    const auto a_index = test_data.schema.protected_index();

    Comparison out;
    std::vector<double> naive, unbiased;
    for (std::size_t i = 0; i < report.individuals.size(); ++i) {
        const auto& s = report.individuals[i];
        naive.push_back(std::abs(s.nds));
        unbiased.push_back(s.ds);
        out.per_record.push_back({s.id, static_cast<int>(test_data.records[i].values[a_index]), truths[i], s.nds, s.ds,
                                  s.naive_p0, s.naive_p1, s.p0, s.p1});
    }
    out.nst = evaluate(Method::nst, naive, truths);
    out.ust = evaluate(Method::ust, unbiased, truths);
    return out;
}

std::string Comparison::to_json() const {
    json doc;
    doc["convention"] = "NST scored as |nds| against the unsigned ground truth";
    doc["nst"] = result_json(nst);
    doc["ust"] = result_json(ust);
    doc["per_record"] = json::array();
    for (const auto& r : per_record) {
        doc["per_record"].push_back({{"id", r.id}, {"truth", r.truth}, {"nds", r.nds}, {"ds", r.ds}});
    }
    return doc.dump(2);
}

std::string Comparison::to_text(const std::string& label) const {
    std::ostringstream out;
    out << "# NST scored as |nds| against the unsigned ground truth\n";
    out << (label.empty() ? "model" : label) << "  n=" << nst.n << "\n";
    out << "        NST      UST\n";
    out << "RMSE    " << fixed(nst.rmse) << "    " << fixed(ust.rmse) << "\n";
    return out.str();
}

std::string Comparison::per_record_csv() const {
    std::string out = "id,protected,truth,nds,ds,naive_p0,naive_p1,p0,p1\n";
    for (const auto& r : per_record) {
        out += std::to_string(r.id) + ',' + std::to_string(r.protected_value) + ',' + format_number(r.truth) + ',' +
               format_number(r.nds) + ',' + format_number(r.ds) + ',' + format_number(r.naive_p0) + ',' +
               format_number(r.naive_p1) + ',' + format_number(r.p0) + ',' + format_number(r.p1) + '\n';
    }
    return out;
}

std::string Comparison::example_table(const std::vector<std::size_t>& ids) const {
    std::ostringstream out;
    out << "            |      NST       |      UST       |  discrimination score\n";
    out << "ID      A   |   P0      P1   |   P0      P1   |  True    NST     UST\n";
    for (auto id : ids) {
        for (const auto& r : per_record) {
            if (r.id != id) continue;
            char line[160];
            std::snprintf(line, sizeof line, "%-7zu %d   | %6.3f  %6.3f | %6.3f  %6.3f | %6.3f  %6.3f  %6.3f\n", r.id,
                          r.protected_value, r.naive_p0, r.naive_p1, r.p0, r.p1, r.truth, r.nds, r.p1 - r.p0);
            out << line;
        }
    }
    return out.str();
}

}  // namespace ust
