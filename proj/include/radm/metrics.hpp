#pragma once

#include <cstddef>
#include <vector>

namespace radm {

/// Scores paired with binary anomaly labels (1 = anomaly). The induced
/// ordering is descending score with ties broken by ascending index.
struct RankedEval {
    std::vector<double> scores;
    std::vector<int> labels;
};

/// Indices in the deterministic evaluation order.
std::vector<std::size_t> ranked_order(const RankedEval& e);

/// Area under the ROC curve as the Mann-Whitney statistic:
/// P(anomaly scores above normal) plus half credit for ties.
/// Requires both classes.
double auroc(const RankedEval& e);

/// Area under the precision-recall curve as average precision (no
/// interpolation): mean over anomalies of the precision at their rank.
/// Requires at least one anomaly.
double auprc(const RankedEval& e);

/// Fraction of anomalies among the k highest-scored rows.
double precision_at_k(const RankedEval& e, std::size_t k);

struct Aggregate {
    double mean = 0.0;
    double stderr_of_mean = 0.0;  // sample stddev / sqrt(runs)
};

/// Mean and standard error over per-seed metric values; needs >= 2 runs.
Aggregate aggregate_runs(const std::vector<double>& per_seed_metrics);

}  // namespace radm
