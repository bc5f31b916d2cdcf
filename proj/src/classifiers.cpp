#include "ust/classifiers.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace ust {

namespace {

using json = nlohmann::json;

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

std::size_t discrete_value(const FeatureSpec& f, double v) {
    if (v != std::floor(v) || v < 0 || v >= static_cast<double>(f.cardinality)) {
        throw DataError("value " + format_number(v) + " of feature '" + f.name + "' is an unseen level");
    }
    return static_cast<std::size_t>(v);
}

// Column-wise mean and standard deviation; a constant column gets scale 1.
void standardization(const std::vector<std::vector<double>>& rows, std::vector<double>& means, std::vector<double>& scales) {
    const std::size_t d = rows.empty() ? 0 : rows.front().size();
    means.assign(d, 0.0);
    scales.assign(d, 0.0);
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < d; ++j) means[j] += r[j];
    }
    for (auto& m : means) m /= static_cast<double>(rows.size());
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < d; ++j) scales[j] += (r[j] - means[j]) * (r[j] - means[j]);
    }
    for (auto& s : scales) {
        s = std::sqrt(s / static_cast<double>(rows.size()));
        if (s < 1e-12) s = 1.0;
    }
}

std::vector<FeatureSpec> feature_specs(const Schema& schema, const std::vector<std::string>& features) {
    std::vector<FeatureSpec> out;
    for (const auto& name : features) {
        const auto& attr = schema.attribute(name);
        out.push_back({attr.name, attr.kind, attr.cardinality()});
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Owns a mkstemp() file and removes it on destruction.
class TempFile {
public:
    TempFile() {
        const char* dir = std::getenv("TMPDIR");
        m_path = std::string(dir && *dir ? dir : "/tmp") + "/ust-XXXXXX";
        m_fd = ::mkstemp(m_path.data());
        if (m_fd < 0) throw RuntimeFailure("cannot create temporary file: " + std::string(std::strerror(errno)));
    }
    ~TempFile() {
        if (m_fd >= 0) ::close(m_fd);
        ::unlink(m_path.c_str());
    }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;

    int fd() const { return m_fd; }
    const std::string& path() const { return m_path; }

private:
    std::string m_path;
    int m_fd = -1;
};

}  // namespace

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::logistic: return "logistic";
        case ModelKind::naive_bayes: return "naive_bayes";
        case ModelKind::knn: return "knn";
        case ModelKind::external: return "external";
        case ModelKind::lookup: return "lookup";
    }
    return "?";
}

std::vector<std::string> ClassifierModel::feature_names() const {
    std::vector<std::string> out;
    for (const auto& f : m_features) out.push_back(f.name);
    return out;
}

std::vector<double> ClassifierModel::predict_many(const std::vector<FeatureRow>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(predict(r));
    return out;
}

FeatureExtractor::FeatureExtractor(const Schema& schema, const ClassifierModel& model) {
    for (const auto& f : model.features()) {
        const auto i = schema.index_of(f.name);
        if (!i) throw DataError("data is missing feature '" + f.name + "' required by the model");
        m_index.push_back(*i);
    }
}

FeatureRow FeatureExtractor::operator()(std::span<const double> record_values) const {
    FeatureRow row(m_index.size());
    for (std::size_t j = 0; j < m_index.size(); ++j) row[j] = record_values[m_index[j]];
    return row;
}

// ---------------------------------------------------------------- logistic

LogisticModel::LogisticModel(std::vector<FeatureSpec> features, std::vector<double> means, std::vector<double> scales,
                             std::vector<double> weights, double bias)
    : ClassifierModel(std::move(features)),
      m_means(std::move(means)),
      m_scales(std::move(scales)),
      m_weights(std::move(weights)),
      m_bias(bias) {
    if (m_means.size() != m_weights.size() || m_scales.size() != m_weights.size()) {
        throw ValidationError("logistic model parameter sizes disagree");
    }
}

std::vector<double> LogisticModel::encode(std::span<const double> row) const {
    const auto& fs = features();
    if (row.size() != fs.size()) throw DataError("feature row has wrong width");
    std::vector<double> x;
    x.reserve(m_weights.size());
    for (std::size_t j = 0; j < fs.size(); ++j) {
        if (fs[j].kind == AttributeKind::categorical) {
            const auto level = discrete_value(fs[j], row[j]);
            for (std::size_t l = 1; l < fs[j].cardinality; ++l) x.push_back(level == l ? 1.0 : 0.0);
        } else {
            if (fs[j].kind == AttributeKind::binary) discrete_value(fs[j], row[j]);
            x.push_back(row[j]);
        }
    }
    return x;
}

std::vector<double> LogisticModel::design_row(std::span<const double> row) const {
    auto x = encode(row);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = (x[j] - m_means[j]) / m_scales[j];
    return x;
}

double LogisticModel::predict(std::span<const double> row) const {
    const auto x = design_row(row);
    return clamp01(sigmoid(std::inner_product(x.begin(), x.end(), m_weights.begin(), m_bias)));
}

std::string LogisticModel::describe() const {
    std::ostringstream out;
    out << "logistic bias=" << format_number(m_bias) << " weights=[";
    for (std::size_t j = 0; j < m_weights.size(); ++j) out << (j ? "," : "") << format_number(m_weights[j]);
    out << "] iterations=" << m_iterations;
    return out.str();
}

namespace {

std::shared_ptr<const ClassifierModel> train_logistic(std::vector<FeatureSpec> specs, const std::vector<FeatureRow>& rows,
                                                      const std::vector<int>& labels, const TrainingOptions& opt) {
    // Encode through a throwaway model with identity scaling.
    std::size_t width = 0;
    for (const auto& f : specs) width += f.kind == AttributeKind::categorical ? f.cardinality - 1 : 1;
    const LogisticModel encoder(specs, std::vector<double>(width, 0.0), std::vector<double>(width, 1.0),
                                std::vector<double>(width, 0.0), 0.0);
    std::vector<std::vector<double>> x;
    x.reserve(rows.size());
    for (const auto& r : rows) x.push_back(encoder.design_row(r));
    std::vector<double> means, scales;
    standardization(x, means, scales);
    for (auto& r : x) {
        for (std::size_t j = 0; j < width; ++j) r[j] = (r[j] - means[j]) / scales[j];
    }

    const double n = static_cast<double>(x.size());
    std::vector<double> w(width, 0.0);
    double b = 0.0;
    std::vector<double> grad(width);
    std::size_t iter = 0;
    for (; iter < opt.iterations; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double residual = sigmoid(std::inner_product(x[i].begin(), x[i].end(), w.begin(), b)) - labels[i];
            grad_b += residual;
            for (std::size_t j = 0; j < width; ++j) grad[j] += residual * x[i][j];
        }
        double max_grad = std::abs(grad_b / n);
        for (std::size_t j = 0; j < width; ++j) {
            grad[j] = grad[j] / n + opt.l2 * w[j];
            max_grad = std::max(max_grad, std::abs(grad[j]));
        }
        if (max_grad < opt.gradient_tolerance) break;
        for (std::size_t j = 0; j < width; ++j) w[j] -= opt.learning_rate * grad[j];
        b -= opt.learning_rate * grad_b / n;
    }
    auto model = std::make_shared<LogisticModel>(std::move(specs), std::move(means), std::move(scales), std::move(w), b);
    model->set_iterations_run(iter);
    return model;
}

}  // namespace

// ------------------------------------------------------------- naive Bayes

NaiveBayesModel::NaiveBayesModel(std::vector<FeatureSpec> features, ClassStats negative, ClassStats positive)
    : ClassifierModel(std::move(features)), m_class{std::move(negative), std::move(positive)} {}

double NaiveBayesModel::log_likelihood(const ClassStats& stats, std::span<const double> row) const {
    constexpr double kLog2Pi = 1.8378770664093453;
    const auto& fs = features();
    double ll = stats.log_prior;
    std::size_t c = 0;
    std::size_t d = 0;
    for (std::size_t j = 0; j < fs.size(); ++j) {
        if (fs[j].kind == AttributeKind::continuous) {
            const double diff = row[j] - stats.mean[c];
            ll -= 0.5 * (kLog2Pi + std::log(stats.variance[c]) + diff * diff / stats.variance[c]);
            ++c;
        } else {
            ll += stats.log_prob[d][discrete_value(fs[j], row[j])];
            ++d;
        }
    }
    return ll;
}

double NaiveBayesModel::predict(std::span<const double> row) const {
    if (row.size() != features().size()) throw DataError("feature row has wrong width");
    const double l0 = log_likelihood(m_class[0], row);
    const double l1 = log_likelihood(m_class[1], row);
    return clamp01(sigmoid(l1 - l0));
}

std::string NaiveBayesModel::describe() const {
    std::ostringstream out;
    out << "naive_bayes log_prior=[" << format_number(m_class[0].log_prior) << "," << format_number(m_class[1].log_prior)
        << "]";
    return out.str();
}

namespace {

std::shared_ptr<const ClassifierModel> train_naive_bayes(std::vector<FeatureSpec> specs, const std::vector<FeatureRow>& rows,
                                                         const std::vector<int>& labels, const TrainingOptions& opt) {
    NaiveBayesModel::ClassStats stats[2];
    double count[2] = {0, 0};
    for (int y : labels) count[y] += 1;

    // Variance floor relative to the largest feature variance.
    double max_var = 0.0;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        if (specs[j].kind != AttributeKind::continuous) continue;
        double m = 0, s = 0;
        for (const auto& r : rows) m += r[j];
        m /= static_cast<double>(rows.size());
        for (const auto& r : rows) s += (r[j] - m) * (r[j] - m);
        max_var = std::max(max_var, s / static_cast<double>(rows.size()));
    }
    const double floor = std::max(opt.min_variance * max_var, 1e-300);

    for (int cls = 0; cls < 2; ++cls) {
        auto& st = stats[cls];
        st.log_prior = std::log(count[cls] / static_cast<double>(rows.size()));
        for (std::size_t j = 0; j < specs.size(); ++j) {
            if (specs[j].kind == AttributeKind::continuous) {
                double m = 0, s = 0;
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (labels[i] == cls) m += rows[i][j];
                }
                m /= count[cls];
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (labels[i] == cls) s += (rows[i][j] - m) * (rows[i][j] - m);
                }
                st.mean.push_back(m);
                st.variance.push_back(s / count[cls] + floor);
            } else {
                std::vector<double> c(specs[j].cardinality, 0.0);
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (labels[i] == cls) c[discrete_value(specs[j], rows[i][j])] += 1.0;
                }
                const double denom = count[cls] + opt.laplace * static_cast<double>(c.size());
                for (auto& v : c) v = std::log((v + opt.laplace) / denom);
                st.log_prob.push_back(std::move(c));
            }
        }
    }
    return std::make_shared<NaiveBayesModel>(std::move(specs), std::move(stats[0]), std::move(stats[1]));
}

}  // namespace

// --------------------------------------------------------------------- kNN

KnnModel::KnnModel(std::vector<FeatureSpec> features, std::vector<double> means, std::vector<double> scales,
                   std::vector<std::vector<double>> points, std::vector<int> labels, std::size_t k)
    : ClassifierModel(std::move(features)),
      m_means(std::move(means)),
      m_scales(std::move(scales)),
      m_labels(std::move(labels)),
      m_k(k) {
    if (m_k == 0) throw ValidationError("k must be positive");
    if (points.size() != m_labels.size() || points.empty()) throw ValidationError("kNN needs one label per point");
    const std::size_t d = this->features().size();
    m_points.reserve(points.size() * d);
    for (const auto& p : points) {
        for (std::size_t j = 0; j < d; ++j) m_points.push_back((p[j] - m_means[j]) / m_scales[j]);
    }
}

double KnnModel::predict(std::span<const double> row) const {
    const std::size_t d = features().size();
    if (row.size() != d) throw DataError("feature row has wrong width");
    std::vector<double> q(d);
    for (std::size_t j = 0; j < d; ++j) q[j] = (row[j] - m_means[j]) / m_scales[j];

    const std::size_t n = m_labels.size();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = &m_points[i * d];
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (p[j] - q[j]) * (p[j] - q[j]);
        dist[i] = {s, i};
    }
    const std::size_t k = std::min(m_k, n);
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    std::size_t positive = 0;
    for (std::size_t i = 0; i < k; ++i) positive += m_labels[dist[i].second] == 1;
    return static_cast<double>(positive) / static_cast<double>(k);
}

std::string KnnModel::describe() const {
    return "knn k=" + std::to_string(m_k) + " points=" + std::to_string(m_labels.size());
}

// ------------------------------------------------------------------ lookup

LookupModel::LookupModel(std::vector<FeatureSpec> features, std::map<std::vector<double>, double> table)
    : ClassifierModel(std::move(features)), m_table(std::move(table)) {
    for (const auto& [key, p] : m_table) {
        if (key.size() != this->features().size()) throw ValidationError("lookup key arity does not match features");
        if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("lookup probability outside [0, 1]");
    }
}

double LookupModel::predict(std::span<const double> row) const {
    const auto it = m_table.find(std::vector<double>(row.begin(), row.end()));
    if (it == m_table.end()) {
        std::string key;
        for (double v : row) key += (key.empty() ? "" : ",") + format_number(v);
        throw DataError("lookup table has no entry for (" + key + ")");
    }
    return it->second;
}

std::string LookupModel::describe() const { return "lookup entries=" + std::to_string(m_table.size()); }

std::string LookupModel::to_json() const {
    json doc;
    doc["features"] = json::array();
    for (const auto& f : features()) {
        json spec{{"name", f.name}, {"kind", std::string(to_string(f.kind))}};
        if (f.kind != AttributeKind::continuous) spec["levels"] = f.cardinality;
        doc["features"].push_back(spec);
    }
    doc["table"] = json::array();
    for (const auto& [key, p] : m_table) doc["table"].push_back(json::array({key, p}));
    return doc.dump(2);
}

std::shared_ptr<const LookupModel> LookupModel::from_json(std::string_view text) {
    try {
        const auto doc = json::parse(text);
        std::vector<FeatureSpec> specs;
        for (const auto& f : doc.at("features")) {
            FeatureSpec spec{f.at("name").get<std::string>(), attribute_kind_from_string(f.value("kind", "binary")), 0};
            if (spec.kind == AttributeKind::binary) spec.cardinality = 2;
            if (f.contains("levels")) spec.cardinality = f["levels"].get<std::size_t>();
            specs.push_back(std::move(spec));
        }
        std::map<std::vector<double>, double> table;
        for (const auto& e : doc.at("table")) {
            if (!table.emplace(e.at(0).get<std::vector<double>>(), e.at(1).get<double>()).second) {
                throw ValidationError("lookup table repeats a key");
            }
        }
        return std::make_shared<LookupModel>(std::move(specs), std::move(table));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("invalid lookup model JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------- external

ExternalModel::ExternalModel(std::vector<FeatureSpec> features, std::string command)
    : ClassifierModel(std::move(features)), m_command(std::move(command)) {
    if (m_command.empty()) throw ValidationError("external model command is empty");
}

double ExternalModel::predict(std::span<const double> row) const {
    return predict_many({FeatureRow(row.begin(), row.end())}).front();
}

std::vector<double> ExternalModel::predict_many(const std::vector<FeatureRow>& rows) const {
    return external_predict(m_command, feature_names(), rows);
}

std::string ExternalModel::describe() const { return "external command=" + m_command; }

std::vector<double> external_predict(const std::string& command, const std::vector<std::string>& header,
                                     const std::vector<FeatureRow>& rows) {
    if (rows.empty()) return {};
    TempFile input, output, errors;
    {
        std::string csv;
        for (std::size_t j = 0; j < header.size(); ++j) csv += (j ? "," : "") + header[j];
        csv += '\n';
        for (const auto& r : rows) {
            for (std::size_t j = 0; j < r.size(); ++j) {
                if (j) csv += ',';
                csv += format_number(r[j]);
            }
            csv += '\n';
        }
        std::size_t written = 0;
        while (written < csv.size()) {
            const auto n = ::write(input.fd(), csv.data() + written, csv.size() - written);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw RuntimeFailure("cannot write model input: " + std::string(std::strerror(errno)));
            }
            written += static_cast<std::size_t>(n);
        }
        ::lseek(input.fd(), 0, SEEK_SET);
    }

    const pid_t pid = ::fork();
    if (pid < 0) throw RuntimeFailure("fork failed: " + std::string(std::strerror(errno)));
    if (pid == 0) {
        ::dup2(input.fd(), STDIN_FILENO);
        ::dup2(output.fd(), STDOUT_FILENO);
        ::dup2(errors.fd(), STDERR_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw RuntimeFailure("waitpid failed: " + std::string(std::strerror(errno)));
    }

    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        auto diag = read_file(errors.path());
        if (diag.size() > 2000) diag.resize(2000);
        const std::string how = WIFEXITED(status) ? "exited with status " + std::to_string(WEXITSTATUS(status))
                                                  : "was terminated by a signal";
        throw RuntimeFailure("external model '" + command + "' " + how + (diag.empty() ? "" : ": " + diag));
    }

    std::vector<double> out;
    std::istringstream lines(read_file(output.path()));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        char* end = nullptr;
        const double p = std::strtod(line.c_str(), &end);
        if (end == line.c_str() || std::string_view(end).find_first_not_of(" \t") != std::string_view::npos) {
            throw RuntimeFailure("external model output line " + std::to_string(line_no) + " is not a number: '" + line + "'");
        }
        if (!(p >= 0.0 && p <= 1.0)) {
            throw RuntimeFailure("external model output line " + std::to_string(line_no) + " is outside [0, 1]: " + line);
        }
        out.push_back(p);
    }
    if (out.size() != rows.size()) {
        throw RuntimeFailure("external model returned " + std::to_string(out.size()) + " probabilities for " +
                             std::to_string(rows.size()) + " rows");
    }
    return out;
}

// ------------------------------------------------------------------ common

std::shared_ptr<const ClassifierModel> train(ModelKind kind, const Dataset& data, const std::vector<std::string>& features,
                                             const TrainingOptions& options) {
    if (data.empty()) throw DataError("cannot train on an empty dataset");
    const auto& outcome = data.schema.roles().outcome;
    if (outcome.empty()) throw DataError("schema has no outcome attribute");
    const auto y_index = data.schema.require(outcome);
    for (const auto& f : features) {
        data.schema.require(f);
        if (f == outcome) throw ValidationError("the outcome '" + f + "' cannot be a model feature");
    }
    if (std::set<std::string>(features.begin(), features.end()).size() != features.size()) {
        throw ValidationError("feature list repeats a name");
    }

    auto specs = feature_specs(data.schema, features);
    std::vector<FeatureRow> rows;
    std::vector<int> labels;
    rows.reserve(data.size());
    labels.reserve(data.size());
    std::vector<std::size_t> idx;
    for (const auto& f : features) idx.push_back(data.schema.require(f));
    for (const auto& r : data.records) {
        FeatureRow row;
        row.reserve(idx.size());
        for (auto i : idx) row.push_back(r.values[i]);
        rows.push_back(std::move(row));
        labels.push_back(r.values[y_index] == 1.0 ? 1 : 0);
    }
    const auto positives = std::count(labels.begin(), labels.end(), 1);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size())) {
        throw DataError("training data contains a single outcome class");
    }

    switch (kind) {
        case ModelKind::logistic: return train_logistic(std::move(specs), rows, labels, options);
        case ModelKind::naive_bayes: return train_naive_bayes(std::move(specs), rows, labels, options);
        case ModelKind::knn: {
            std::vector<double> means, scales;
            standardization(rows, means, scales);
            return std::make_shared<KnnModel>(std::move(specs), std::move(means), std::move(scales), std::move(rows),
                                              std::move(labels), options.k);
        }
        case ModelKind::external:
        case ModelKind::lookup: break;
    }
    throw ValidationError("model kind '" + std::string(to_string(kind)) + "' is not trainable");
}

double predict_proba(const ClassifierModel& model, const Schema& schema, const Record& record) {
    const FeatureExtractor extract(schema, model);
    return model.predict(extract(record.values));
}

Record flip_protected(const Record& record, const Schema& schema) {
    Record out = record;
    const auto a = schema.protected_index();
    out.values[a] = out.values[a] == 0.0 ? 1.0 : 0.0;
    return out;
}

}  // namespace ust
