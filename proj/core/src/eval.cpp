#include "walkfeat/eval.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace walkfeat {

RetrievalIndex build_index(const std::vector<FeatureVector>& features) {
    if (features.empty()) throw DataError("cannot build an empty retrieval index");
    RetrievalIndex index;
    std::unordered_set<std::string> seen;
    const std::size_t dim = features.front().values.size();
    for (const auto& f : features) {
        if (f.values.size() != dim)
            throw DataError("inconsistent feature dimension for " + f.source_id);
        if (!seen.insert(f.source_id).second)
            throw DataError("duplicate source_id in index: " + f.source_id);
        RetrievalIndex::Entry e;
        e.source_id = f.source_id;
        e.label = f.label;
        e.feature = Eigen::Map<const Eigen::VectorXd>(f.values.data(),
                                                      static_cast<long>(f.values.size()));
        index.entries.push_back(std::move(e));
    }
    return index;
}

namespace {

// Ranked entry indices for one query, nearest first, ties by source_id.
std::vector<int> rank_entries(const RetrievalIndex& index, int query) {
    const auto& q = index.entries[static_cast<std::size_t>(query)].feature;
    std::vector<std::pair<double, int>> order;
    order.reserve(index.entries.size() - 1);
    for (int i = 0; i < static_cast<int>(index.entries.size()); ++i) {
        if (i == query) continue;
        order.emplace_back((index.entries[static_cast<std::size_t>(i)].feature - q).norm(), i);
    }
    std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return index.entries[static_cast<std::size_t>(a.second)].source_id <
               index.entries[static_cast<std::size_t>(b.second)].source_id;
    });
    std::vector<int> ranked(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) ranked[i] = order[i].second;
    return ranked;
}

int find_entry(const RetrievalIndex& index, const std::string& source_id) {
    for (int i = 0; i < static_cast<int>(index.entries.size()); ++i)
        if (index.entries[static_cast<std::size_t>(i)].source_id == source_id) return i;
    throw DataError("query not found in index: " + source_id);
}

}  // namespace

std::vector<std::string> retrieve(const RetrievalIndex& index, const std::string& query_id,
                                  int k) {
    if (k < 0) throw ConfigError("retrieve: k must be non-negative");
    std::vector<int> ranked = rank_entries(index, find_entry(index, query_id));
    if (static_cast<std::size_t>(k) < ranked.size()) ranked.resize(static_cast<std::size_t>(k));
    std::vector<std::string> out;
    out.reserve(ranked.size());
    for (int i : ranked) out.push_back(index.entries[static_cast<std::size_t>(i)].source_id);
    return out;
}

double average_precision(const std::vector<int>& relevance, int total_relevant) {
    if (total_relevant < 1)
        throw DataError("average_precision: query has no relevant items (R = 0)");
    double sum = 0.0;
    int hits = 0;
    for (std::size_t k = 0; k < relevance.size(); ++k) {
        if (relevance[k]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(total_relevant);
}

RetrievalReport mean_average_precision(const RetrievalIndex& index,
                                       const std::vector<std::string>& query_ids) {
    RetrievalReport report;
    std::map<std::string, std::pair<double, int>> per_class;  // label -> (sum, count)
    double total = 0.0;

    for (const auto& qid : query_ids) {
        int query = find_entry(index, qid);
        const std::string& label = index.entries[static_cast<std::size_t>(query)].label;

        std::vector<int> ranked = rank_entries(index, query);
        std::vector<int> relevance(ranked.size());
        int relevant_count = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            relevance[i] =
                index.entries[static_cast<std::size_t>(ranked[i])].label == label ? 1 : 0;
            relevant_count += relevance[i];
        }
        if (relevant_count == 0) {
            ++report.skipped;
            continue;
        }
        double ap = average_precision(relevance, relevant_count);
        total += ap;
        ++report.queries;
        auto& slot = per_class[label];
        slot.first += ap;
        slot.second += 1;
    }

    if (report.queries == 0) throw DataError("mean_average_precision: no scorable queries");
    report.map = total / report.queries;
    for (const auto& [label, sum_count] : per_class)
        report.per_class_ap[label] = sum_count.first / sum_count.second;
    return report;
}

double accuracy(const std::vector<std::string>& predictions,
                const std::vector<std::string>& labels) {
    if (predictions.size() != labels.size())
        throw DataError("accuracy: prediction/label length mismatch");
    if (predictions.empty()) throw DataError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace walkfeat
