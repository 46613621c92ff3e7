#include "relnn/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace relnn::cli {

namespace {

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

MetricsReport compute_constant_or_vector(const std::vector<double>* pred, double constant,
                                         const learn::Labels& labels, bool classification) {
    MetricsReport r;
    r.n = static_cast<int>(labels.items.size());
    if (r.n == 0) return r;

    double correct = 0.0, ll = 0.0, mse = 0.0, balance = 0.0;
    for (const auto& [obj, y] : labels.items) {
        double p = pred ? pred->at(obj) : constant;
        balance += y;
        mse += (p - y) * (p - y);
        if (classification) {
            correct += ((p >= 0.5) == (y >= 0.5)) ? 1.0 : 0.0;
            ll += -(y * std::log2(p) + (1.0 - y) * std::log2(1.0 - p));
        }
    }
    double inv_n = 1.0 / static_cast<double>(r.n);
    r.mse = mse * inv_n;
    r.class_balance = balance * inv_n;
    if (classification) {
        r.accuracy = correct * inv_n;
        r.log_loss = ll * inv_n;
    }
    return r;
}

} // namespace

MetricsReport compute_metrics(const std::vector<double>& pred, const learn::Labels& labels,
                              bool classification) {
    return compute_constant_or_vector(&pred, 0.0, labels, classification);
}

MetricsReport mean_baseline(double train_mean, const learn::Labels& labels, bool classification) {
    return compute_constant_or_vector(nullptr, train_mean, labels, classification);
}

std::string MetricsReport::lines() const {
    std::ostringstream os;
    if (accuracy) os << "accuracy=" << fmt4(*accuracy) << "\n";
    if (log_loss) os << "logloss=" << fmt4(*log_loss) << "\n";
    os << "mse=" << fmt4(mse) << "\n";
    os << "n=" << n << "\n";
    os << "class_balance=" << fmt4(class_balance) << "\n";
    return os.str();
}

std::string MetricsReport::csv_header() { return "accuracy,logloss,mse,n,class_balance"; }

std::string MetricsReport::csv_row() const {
    std::ostringstream os;
    os << (accuracy ? fmt4(*accuracy) : "") << "," << (log_loss ? fmt4(*log_loss) : "") << ","
       << fmt4(mse) << "," << n << "," << fmt4(class_balance);
    return os.str();
}

} // namespace relnn::cli
