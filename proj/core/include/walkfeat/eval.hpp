#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "walkfeat/pipeline.hpp"

namespace walkfeat {

/// Flat feature store for retrieval; distances are Euclidean.
struct RetrievalIndex {
    struct Entry {
        std::string source_id;
        std::string label;
        Eigen::VectorXd feature;
    };
    std::vector<Entry> entries;
};

/// Builds an index from embeddings; source_ids must be unique and feature
/// dimensions consistent.
RetrievalIndex build_index(const std::vector<FeatureVector>& features);

/// The k nearest entries to the query (itself excluded), closest first;
/// distance ties order by source_id. k larger than the index clamps.
std::vector<std::string> retrieve(const RetrievalIndex& index, const std::string& query_id, int k);

/// AP = (1/R) * sum_k Precision(k) * rel(k) over the full retrieved ranking.
double average_precision(const std::vector<int>& relevance, int total_relevant);

struct RetrievalReport {
    double map = 0.0;
    std::map<std::string, double> per_class_ap;
    int queries = 0;
    int skipped = 0;  // class singletons: no possible relevant result
};

/// Mean AP over the given queries, each ranking the full index minus itself;
/// an item is relevant when its label matches the query's. Queries whose
/// class has no other member are skipped with a count.
RetrievalReport mean_average_precision(const RetrievalIndex& index,
                                       const std::vector<std::string>& query_ids);

// --- linear SVM -------------------------------------------------------------

struct SvmConfig {
    double reg = 1e-4;  // L2 regularization strength (lambda)
    int epochs = 40;
    std::uint64_t seed = 0;
};

/// One-vs-rest linear classifiers trained in the primal by stochastic
/// subgradient descent on the hinge loss. Features are standardized with
/// train-set statistics stored in the model.
struct SvmModel {
    std::vector<std::string> classes;  // sorted
    Eigen::MatrixXd weights;           // classes x dim
    Eigen::VectorXd bias;              // classes
    Eigen::VectorXd feat_mean, feat_std;
    SvmConfig config;
    std::vector<double> objective_trace;  // per-epoch regularized hinge objective
};

SvmModel svm_train(const std::vector<FeatureVector>& training, const SvmConfig& config);

std::string svm_predict(const SvmModel& model, const std::vector<double>& feature);

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& labels);

struct ClassificationReport {
    double accuracy = 0.0;
    std::vector<std::string> classes;
    std::vector<std::vector<int>> confusion;  // [true][predicted]
};

ClassificationReport svm_evaluate(const SvmModel& model,
                                  const std::vector<FeatureVector>& test_set);

}  // namespace walkfeat
