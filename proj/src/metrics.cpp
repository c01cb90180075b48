#include "radm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace radm {

namespace {

void validate(const RankedEval& e) {
    if (e.scores.size() != e.labels.size())
        throw std::invalid_argument("RankedEval: scores and labels lengths differ (" +
                                    std::to_string(e.scores.size()) + " vs " +
                                    std::to_string(e.labels.size()) + ")");
    if (e.scores.empty()) throw std::invalid_argument("RankedEval: empty input");
    for (int l : e.labels)
        if (l != 0 && l != 1) throw std::invalid_argument("RankedEval: labels must be 0 or 1");
}

std::size_t positive_count(const RankedEval& e) {
    std::size_t p = 0;
    for (int l : e.labels) p += std::size_t(l);
    return p;
}

}  // namespace

std::vector<std::size_t> ranked_order(const RankedEval& e) {
    validate(e);
    std::vector<std::size_t> order(e.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (e.scores[a] != e.scores[b]) return e.scores[a] > e.scores[b];
        return a < b;
    });
    return order;
}

double auroc(const RankedEval& e) {
    validate(e);
    const std::size_t n = e.scores.size();
    const std::size_t pos = positive_count(e);
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("auroc: both classes must be present");

    // rank-sum with average ranks over tied score groups
    std::vector<std::size_t> asc(n);
    std::iota(asc.begin(), asc.end(), 0);
    std::stable_sort(asc.begin(), asc.end(),
                     [&](std::size_t a, std::size_t b) { return e.scores[a] < e.scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && e.scores[asc[j]] == e.scores[asc[i]]) ++j;
        const double avg_rank = 0.5 * double(i + 1 + j);  // ranks are 1-based
        for (std::size_t t = i; t < j; ++t)
            if (e.labels[asc[t]] == 1) pos_rank_sum += avg_rank;
        i = j;
    }
    return (pos_rank_sum - 0.5 * double(pos) * double(pos + 1)) / (double(pos) * double(neg));
}

double auprc(const RankedEval& e) {
    validate(e);
    const std::size_t pos = positive_count(e);
    if (pos == 0) throw std::invalid_argument("auprc: at least one anomaly label required");
    const std::vector<std::size_t> order = ranked_order(e);
    double ap = 0.0;
    std::size_t seen_pos = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        if (e.labels[order[rank]] == 1) {
            ++seen_pos;
            ap += double(seen_pos) / double(rank + 1);
        }
    }
    return ap / double(pos);
}

double precision_at_k(const RankedEval& e, std::size_t k) {
    validate(e);
    if (k == 0) throw std::invalid_argument("precision_at_k: k must be >= 1");
    if (k > e.scores.size())
        throw std::invalid_argument("precision_at_k: k=" + std::to_string(k) + " exceeds " +
                                    std::to_string(e.scores.size()) + " rows");
    const std::vector<std::size_t> order = ranked_order(e);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += std::size_t(e.labels[order[i]]);
    return double(hits) / double(k);
}

Aggregate aggregate_runs(const std::vector<double>& per_seed_metrics) {
    if (per_seed_metrics.size() < 2)
        throw std::invalid_argument("aggregate_runs: need at least 2 runs, got " +
                                    std::to_string(per_seed_metrics.size()));
    Aggregate a;
    for (double v : per_seed_metrics) a.mean += v;
    a.mean /= double(per_seed_metrics.size());
    double ss = 0.0;
    for (double v : per_seed_metrics) ss += (v - a.mean) * (v - a.mean);
    const double sample_sd = std::sqrt(ss / double(per_seed_metrics.size() - 1));
    a.stderr_of_mean = sample_sd / std::sqrt(double(per_seed_metrics.size()));
    return a;
}

}  // namespace radm
