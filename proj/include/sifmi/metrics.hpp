#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sifmi/influence.hpp"

namespace sifmi {

// Pooled accuracy over both evaluation sets; equals the mean of per-class
// accuracies exactly when the two sets have equal sizes, which the split
// protocol guarantees.
double balanced_accuracy(const std::vector<int>& member_preds,
                         const std::vector<int>& nonmember_preds);

struct ConfusionCounts {
    long long tp = 0;  // members predicted member
    long long fn = 0;
    long long fp = 0;  // non-members predicted member
    long long tn = 0;
};

struct EvalReport {
    std::string attack;
    ConfusionCounts counts;
    long long n1 = 0;
    long long n2 = 0;
    double member_accuracy = 0.0;
    std::optional<double> member_precision;  // null when no positive predictions
    double member_recall = 0.0;
    double nonmember_accuracy = 0.0;
    std::optional<double> nonmember_precision;
    double nonmember_recall = 0.0;
    double balanced_acc = 0.0;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
};

EvalReport eval_from_predictions(const std::string& attack_name,
                                 const std::vector<int>& member_preds,
                                 const std::vector<int>& nonmember_preds);

// Display rounding used by report tables; stored values keep full precision.
double round3(double v);

struct HistogramData {
    std::vector<double> edges;  // bins+1 edges over the shared score range
    std::vector<long long> member_counts;
    std::vector<long long> nonmember_counts;
};

// Aligned member/non-member histograms over a shared range; records must
// carry membership ground truth.
HistogramData histogram_export(const std::vector<SifRecord>& records, int bins);
void write_histogram_csv(const HistogramData& hist, const std::string& path);

// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Linear-interpolation quantile; `q` in [0,1].
double quantile(std::vector<double> values, double q);
double interquartile_range(const std::vector<double>& values);

}  // namespace sifmi
