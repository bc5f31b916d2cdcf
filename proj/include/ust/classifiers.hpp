#ifndef UST_CLASSIFIERS_HPP
#define UST_CLASSIFIERS_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ust/dataset.hpp"

namespace ust {

enum class ModelKind { logistic, naive_bayes, knn, external, lookup };

std::string_view to_string(ModelKind kind);

/// Name and domain of one model input, in model order.
struct FeatureSpec {
    std::string name;
    AttributeKind kind = AttributeKind::continuous;
    std::size_t cardinality = 0;  // discrete kinds only
};

using FeatureRow = std::vector<double>;

/// The audited black box f(): maps a feature row to P(Y = 1 | row).
///
/// Implementations are immutable after construction and safe to call from
/// several threads at once.
class ClassifierModel {
public:
    explicit ClassifierModel(std::vector<FeatureSpec> features) : m_features(std::move(features)) {}
    virtual ~ClassifierModel() = default;

    virtual ModelKind kind() const = 0;
    const std::vector<FeatureSpec>& features() const { return m_features; }
    std::vector<std::string> feature_names() const;

    /// P(Y = 1) for one row in model feature order; always in [0, 1].
    virtual double predict(std::span<const double> row) const = 0;

    /// Batch form. The default loops over predict(); models with per-call
    /// overhead (subprocesses) override it.
    virtual std::vector<double> predict_many(const std::vector<FeatureRow>& rows) const;

    /// Human readable parameter dump for manifests and debugging.
    virtual std::string describe() const = 0;

private:
    std::vector<FeatureSpec> m_features;
};

/// Maps schema-aligned records to a model's feature rows.
class FeatureExtractor {
public:
    FeatureExtractor(const Schema& schema, const ClassifierModel& model);

    FeatureRow operator()(std::span<const double> record_values) const;
    std::size_t width() const { return m_index.size(); }

private:
    std::vector<std::size_t> m_index;
};

struct TrainingOptions {
    std::uint64_t seed = 0;
    // logistic regression
    double l2 = 1e-4;
    double learning_rate = 0.1;
    std::size_t iterations = 5000;
    double gradient_tolerance = 1e-7;
    // k nearest neighbours
    std::size_t k = 5;
    // naive Bayes
    double laplace = 1.0;
    double min_variance = 1e-9;
};

std::shared_ptr<const ClassifierModel> train(ModelKind kind, const Dataset& data, const std::vector<std::string>& features,
                                             const TrainingOptions& options = {});

/// Logistic regression fitted by full-batch gradient descent on standardized
/// inputs. Categorical inputs are one-hot encoded (first level dropped).
class LogisticModel final : public ClassifierModel {
public:
    /// `weights` act on the encoded, standardized design row.
    LogisticModel(std::vector<FeatureSpec> features, std::vector<double> means, std::vector<double> scales,
                  std::vector<double> weights, double bias);

    ModelKind kind() const override { return ModelKind::logistic; }
    double predict(std::span<const double> row) const override;
    std::string describe() const override;

    /// Encoded, standardized design row for a feature row.
    std::vector<double> design_row(std::span<const double> row) const;
    const std::vector<double>& weights() const { return m_weights; }
    double bias() const { return m_bias; }
    std::size_t iterations_run() const { return m_iterations; }
    void set_iterations_run(std::size_t n) { m_iterations = n; }

private:
    std::vector<double> encode(std::span<const double> row) const;

    std::vector<double> m_means;
    std::vector<double> m_scales;
    std::vector<double> m_weights;
    double m_bias;
    std::size_t m_iterations = 0;
};

/// Gaussian likelihood for continuous inputs, Laplace-smoothed counts for
/// discrete ones.
class NaiveBayesModel final : public ClassifierModel {
public:
    struct ClassStats {
        double log_prior = 0.0;
        std::vector<double> mean;                    // continuous features
        std::vector<double> variance;                // continuous features
        std::vector<std::vector<double>> log_prob;   // discrete features, per level
    };

    NaiveBayesModel(std::vector<FeatureSpec> features, ClassStats negative, ClassStats positive);

    ModelKind kind() const override { return ModelKind::naive_bayes; }
    double predict(std::span<const double> row) const override;
    std::string describe() const override;

private:
    double log_likelihood(const ClassStats& stats, std::span<const double> row) const;

    ClassStats m_class[2];
};

/// Vote fraction among the k nearest training rows (Euclidean distance on
/// standardized inputs, ties broken by lower training row id).
class KnnModel final : public ClassifierModel {
public:
    KnnModel(std::vector<FeatureSpec> features, std::vector<double> means, std::vector<double> scales,
             std::vector<std::vector<double>> points, std::vector<int> labels, std::size_t k);

    ModelKind kind() const override { return ModelKind::knn; }
    double predict(std::span<const double> row) const override;
    std::string describe() const override;
    std::size_t k() const { return m_k; }

private:
    std::vector<double> m_means;
    std::vector<double> m_scales;
    std::vector<double> m_points;  // row-major, standardized
    std::vector<int> m_labels;
    std::size_t m_k;
};

/// Probability table keyed by the full feature tuple.
class LookupModel final : public ClassifierModel {
public:
    LookupModel(std::vector<FeatureSpec> features, std::map<std::vector<double>, double> table);

    ModelKind kind() const override { return ModelKind::lookup; }
    double predict(std::span<const double> row) const override;
    std::string describe() const override;
    const std::map<std::vector<double>, double>& table() const { return m_table; }

    /// `{"features":[{"name":..,"kind":..,"levels":n}...], "table":[[[v,...],p],...]}`
    std::string to_json() const;
    static std::shared_ptr<const LookupModel> from_json(std::string_view text);

private:
    std::map<std::vector<double>, double> m_table;
};

/// Runs `command` through /bin/sh once per batch: CSV with a header row of
/// the feature names on stdin, one probability per line on stdout.
class ExternalModel final : public ClassifierModel {
public:
    ExternalModel(std::vector<FeatureSpec> features, std::string command);

    ModelKind kind() const override { return ModelKind::external; }
    double predict(std::span<const double> row) const override;
    std::vector<double> predict_many(const std::vector<FeatureRow>& rows) const override;
    std::string describe() const override;
    const std::string& command() const { return m_command; }

private:
    std::string m_command;
};

/// Batch call of an external model given as a shell command. Throws
/// RuntimeFailure on a nonzero exit, a row-count mismatch or a value outside
/// [0, 1].
std::vector<double> external_predict(const std::string& command, const std::vector<std::string>& header,
                                     const std::vector<FeatureRow>& rows);

/// P(Y = 1 | record) for a schema-aligned record.
double predict_proba(const ClassifierModel& model, const Schema& schema, const Record& record);

/// Copy of `record` with the protected attribute mapped 0 <-> 1.
Record flip_protected(const Record& record, const Schema& schema);

}  // namespace ust

#endif  // UST_CLASSIFIERS_HPP
