#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relnn/learn.hpp"

namespace relnn::cli {

// Held-out metrics. Log loss is reported in bits (base-2 logarithm); the
// mean baseline's log loss then equals the binary entropy of the class
// balance. Accuracy thresholds predictions at 0.5.
struct MetricsReport {
    std::optional<double> accuracy;
    std::optional<double> log_loss;
    double mse = 0.0;
    int n = 0;
    double class_balance = 0.0;

    std::string lines() const;   // metric=value, one per line, 4 decimals
    std::string csv_row() const; // accuracy,logloss,mse,n,class_balance
    static std::string csv_header();
};

// classification: include accuracy and base-2 log loss.
MetricsReport compute_metrics(const std::vector<double>& pred, const learn::Labels& labels,
                              bool classification);

// The constant predictor at the training mean.
MetricsReport mean_baseline(double train_mean, const learn::Labels& labels, bool classification);

} // namespace relnn::cli
