#include <algorithm>
#include <numeric>
#include <random>

#include "walkfeat/eval.hpp"
#include "walkfeat/rng.hpp"

namespace walkfeat {

namespace {

Eigen::MatrixXd to_matrix(const std::vector<FeatureVector>& features) {
    const long n = static_cast<long>(features.size());
    const long d = static_cast<long>(features.front().values.size());
    Eigen::MatrixXd x(n, d);
    for (long i = 0; i < n; ++i) {
        if (static_cast<long>(features[static_cast<std::size_t>(i)].values.size()) != d)
            throw DataError("svm: inconsistent feature dimensions");
        x.row(i) = Eigen::Map<const Eigen::VectorXd>(
                       features[static_cast<std::size_t>(i)].values.data(), d)
                       .transpose();
    }
    return x;
}

double hinge_objective(const Eigen::MatrixXd& x, const std::vector<Eigen::VectorXd>& ys,
                       const SvmModel& model) {
    const long n = x.rows();
    double total = 0.0;
    for (std::size_t c = 0; c < ys.size(); ++c) {
        const long row = static_cast<long>(c);
        Eigen::VectorXd scores = x * model.weights.row(row).transpose();
        scores.array() += model.bias[row];
        Eigen::VectorXd margins = ys[c].cwiseProduct(scores);
        double hinge = 0.0;
        for (long i = 0; i < n; ++i) hinge += std::max(0.0, 1.0 - margins[i]);
        total += 0.5 * model.config.reg * model.weights.row(row).squaredNorm() +
                 hinge / static_cast<double>(n);
    }
    return total / static_cast<double>(ys.size());
}

}  // namespace

SvmModel svm_train(const std::vector<FeatureVector>& training, const SvmConfig& config) {
    if (training.empty()) throw DataError("svm_train: empty training set");
    if (config.reg <= 0.0) throw ConfigError("svm regularization must be positive");
    if (config.epochs < 1) throw ConfigError("svm epochs must be at least 1");

    SvmModel model;
    model.config = config;
    for (const auto& f : training) {
        if (f.label.empty()) throw DataError("svm_train: unlabeled training sample " + f.source_id);
        if (std::find(model.classes.begin(), model.classes.end(), f.label) == model.classes.end())
            model.classes.push_back(f.label);
    }
    std::sort(model.classes.begin(), model.classes.end());
    if (model.classes.size() < 2) throw DataError("svm_train: need at least two classes");

    Eigen::MatrixXd x = to_matrix(training);
    const long n = x.rows(), d = x.cols();

    // Standardize with train statistics; the model carries them for predict.
    model.feat_mean = x.colwise().mean();
    Eigen::VectorXd var =
        ((x.rowwise() - model.feat_mean.transpose()).array().square().colwise().sum() /
         static_cast<double>(n))
            .matrix();
    model.feat_std = var.array().sqrt().max(1e-8).matrix();
    Eigen::MatrixXd xs = (x.rowwise() - model.feat_mean.transpose()).array().rowwise() /
                         model.feat_std.transpose().array();

    const long nc = static_cast<long>(model.classes.size());
    std::vector<Eigen::VectorXd> ys(static_cast<std::size_t>(nc), Eigen::VectorXd::Zero(n));
    for (long i = 0; i < n; ++i) {
        const std::string& label = training[static_cast<std::size_t>(i)].label;
        for (long c = 0; c < nc; ++c)
            ys[static_cast<std::size_t>(c)][i] =
                model.classes[static_cast<std::size_t>(c)] == label ? 1.0 : -1.0;
    }

    model.weights = Eigen::MatrixXd::Zero(nc, d);
    model.bias = Eigen::VectorXd::Zero(nc);

    // Pegasos-style schedule: eta_t = 1 / (lambda * t), shared sample order
    // across the one-vs-rest problems. The bias stays unregularized.
    auto rng = make_rng(derive_seed(config.seed, "svm"));
    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0L);
    long t = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (long i : order) {
            ++t;
            const double eta = 1.0 / (config.reg * static_cast<double>(t));
            for (long c = 0; c < nc; ++c) {
                const double y = ys[static_cast<std::size_t>(c)][i];
                const double margin =
                    y * (model.weights.row(c).dot(xs.row(i)) + model.bias[c]);
                model.weights.row(c) *= (1.0 - eta * config.reg);
                if (margin < 1.0) {
                    model.weights.row(c) += eta * y * xs.row(i);
                    model.bias[c] += eta * y;
                }
            }
        }
        model.objective_trace.push_back(hinge_objective(xs, ys, model));
    }
    return model;
}

std::string svm_predict(const SvmModel& model, const std::vector<double>& feature) {
    if (static_cast<long>(feature.size()) != model.weights.cols())
        throw DataError("svm_predict: feature dimension mismatch");
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(feature.data(),
                                                          static_cast<long>(feature.size()));
    Eigen::VectorXd xs =
        ((x - model.feat_mean).array() / model.feat_std.array()).matrix();
    Eigen::VectorXd scores = model.weights * xs + model.bias;
    long best = 0;
    for (long c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = c;  // ties keep the lowest class index
    return model.classes[static_cast<std::size_t>(best)];
}

ClassificationReport svm_evaluate(const SvmModel& model,
                                  const std::vector<FeatureVector>& test_set) {
    if (test_set.empty()) throw DataError("svm_evaluate: empty test set");
    ClassificationReport report;
    report.classes = model.classes;

    // Confusion rows cover model classes plus any unseen test labels.
    auto class_index = [&](const std::string& label) {
        auto it = std::find(report.classes.begin(), report.classes.end(), label);
        if (it == report.classes.end()) {
            report.classes.push_back(label);
            return static_cast<int>(report.classes.size()) - 1;
        }
        return static_cast<int>(it - report.classes.begin());
    };

    std::vector<std::string> predictions, labels;
    std::vector<std::pair<int, int>> cells;
    for (const auto& f : test_set) {
        std::string pred = svm_predict(model, f.values);
        predictions.push_back(pred);
        labels.push_back(f.label);
        cells.emplace_back(class_index(f.label), class_index(pred));
    }
    const int nc = static_cast<int>(report.classes.size());
    report.confusion.assign(static_cast<std::size_t>(nc),
                            std::vector<int>(static_cast<std::size_t>(nc), 0));
    for (auto [t, p] : cells)
        ++report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    report.accuracy = accuracy(predictions, labels);
    return report;
}

}  // namespace walkfeat
