#ifndef UST_EVALUATION_HPP
#define UST_EVALUATION_HPP

#include <string>
#include <vector>

#include "ust/situation_test.hpp"
#include "ust/stats.hpp"

namespace ust {

enum class Method { nst, ust };

std::string_view to_string(Method m);

double rmse(std::span<const double> estimates, std::span<const double> truths);

struct EvaluationResult {
    Method method = Method::ust;
    double rmse = 0.0;
    std::size_t n = 0;
    std::vector<std::pair<double, double>> score_quantiles;
    Histogram histogram;
};

/// Per-record triple for distribution plots, plus the four probabilities in
/// the layout of a naive/unbiased comparison table.
struct ScoreTriple {
    std::size_t id = 0;
    int protected_value = 0;
    double truth = 0.0;
    double nds = 0.0;   // signed
    double ds = 0.0;    // unsigned
    double naive_p0 = 0.0, naive_p1 = 0.0;
    double p0 = 0.0, p1 = 0.0;
};

/// NST and UST run over the same records. NST enters the RMSE as |nds|
/// because the ground truth is unsigned.
struct Comparison {
    EvaluationResult nst;
    EvaluationResult ust;
    std::vector<ScoreTriple> per_record;

    std::string to_json() const;
    /// Aligned text table: method, n, RMSE.
    std::string to_text(const std::string& label = "") const;
    /// `id,protected,truth,nds,ds,naive_p0,naive_p1,p0,p1`
    std::string per_record_csv() const;
    /// Rows for the given ids, laid out as ID | A | naive P0 P1 | unbiased P0 P1 | True NST UST.
    std::string example_table(const std::vector<std::size_t>& ids) const;
};

inline constexpr std::size_t kHistogramBins = 20;

EvaluationResult evaluate(Method method, std::span<const double> estimates, std::span<const double> truths);

Comparison compare(const ClassifierModel& model, const Dataset& test_data, const AuditConfig& config,
                   std::span<const double> truths);

}  // namespace ust

#endif  // UST_EVALUATION_HPP
