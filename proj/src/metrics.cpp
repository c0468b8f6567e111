#include "mialab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "mialab/errors.hpp"

namespace mia {

namespace {

struct Counts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Counts count_at(const std::vector<double>& scores, const std::vector<int>& membership,
                double threshold) {
    Counts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (membership[i] != 0) {
            predicted ? ++c.tp : ++c.fn;
        } else {
            predicted ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

} // namespace

EvalResult evaluate(const std::vector<double>& scores, const std::vector<int>& membership,
                    double threshold) {
    if (scores.size() != membership.size()) {
        throw ArgumentError("scores and membership labels must align");
    }
    if (scores.empty()) throw ArgumentError("nothing to evaluate");

    const std::size_t p = static_cast<std::size_t>(
        std::count_if(membership.begin(), membership.end(), [](int m) { return m != 0; }));
    const std::size_t n = scores.size() - p;

    EvalResult result;
    const Counts c = count_at(scores, membership, threshold);
    result.attack_accuracy =
        static_cast<double>(c.tp + c.tn) / static_cast<double>(scores.size());
    result.tpr = p > 0 ? static_cast<double>(c.tp) / static_cast<double>(p) : 0.0;
    result.fpr = n > 0 ? static_cast<double>(c.fp) / static_cast<double>(n) : 0.0;

    // Thresholds: +inf, midpoints between consecutive distinct scores, -inf.
    std::vector<double> distinct = scores;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<double> thresholds;
    thresholds.push_back(std::numeric_limits<double>::infinity());
    for (std::size_t i = distinct.size(); i-- > 1;) {
        thresholds.push_back(0.5 * (distinct[i - 1] + distinct[i]));
    }
    thresholds.push_back(-std::numeric_limits<double>::infinity());

    for (double th : thresholds) {
        const Counts ct = count_at(scores, membership, th);
        RocPoint pt;
        pt.threshold = th;
        pt.tpr = p > 0 ? static_cast<double>(ct.tp) / static_cast<double>(p) : 0.0;
        pt.fpr = n > 0 ? static_cast<double>(ct.fp) / static_cast<double>(n) : 0.0;
        result.roc_points.push_back(pt);
    }

    double auc = 0.0;
    for (std::size_t i = 1; i < result.roc_points.size(); ++i) {
        const auto& a = result.roc_points[i - 1];
        const auto& b = result.roc_points[i];
        auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
    }
    result.auc = auc;
    return result;
}

EvalResult evaluate_per_class(const std::vector<double>& scores,
                              const std::vector<int>& membership,
                              const std::vector<std::size_t>& class_labels, double threshold) {
    if (class_labels.size() != scores.size()) {
        throw ArgumentError("class labels must align with scores");
    }
    EvalResult result = evaluate(scores, membership, threshold);
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> per; // class -> (hits, total)
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        const bool correct = predicted == (membership[i] != 0);
        auto& [hits, total] = per[class_labels[i]];
        if (correct) ++hits;
        ++total;
    }
    for (const auto& [cls, ht] : per) {
        result.per_class_accuracy[cls] =
            static_cast<double>(ht.first) / static_cast<double>(ht.second);
    }
    return result;
}

std::vector<GradNormStats> grad_norm_report(const std::vector<GradNormGroup>& groups,
                                            std::size_t bins) {
    if (groups.empty()) throw ArgumentError("no gradient norm groups");
    if (bins < 1) throw ArgumentError("need at least one histogram bin");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& g : groups) {
        if (g.values.empty()) throw ArgumentError("empty gradient norm group " + g.group);
        for (double v : g.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi <= lo) hi = lo + 1.0; // degenerate range: single bin catches all

    std::vector<GradNormStats> stats;
    for (const auto& g : groups) {
        GradNormStats s;
        s.group = g.group;
        s.epoch = g.epoch;
        s.count = g.values.size();
        double sum = 0.0;
        for (double v : g.values) sum += v;
        s.mean = sum / static_cast<double>(s.count);
        double ss = 0.0;
        for (double v : g.values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(s.count));
        s.histogram.assign(bins, 0);
        s.hist_lo = lo;
        s.hist_hi = hi;
        for (double v : g.values) {
            std::size_t bin = static_cast<std::size_t>((v - lo) / (hi - lo) *
                                                       static_cast<double>(bins));
            if (bin >= bins) bin = bins - 1;
            ++s.histogram[bin];
        }
        stats.push_back(std::move(s));
    }

    // Pairwise separation per epoch: |mean_m - mean_n| > pooled std / 2.
    for (auto& s : stats) {
        for (const auto& other : stats) {
            if (other.epoch != s.epoch || other.group == s.group) continue;
            const double pooled =
                std::sqrt(0.5 * (s.stddev * s.stddev + other.stddev * other.stddev));
            if (std::abs(s.mean - other.mean) > pooled / 2.0) s.separated = true;
        }
    }
    return stats;
}

void write_grad_norm_csv(const std::vector<GradNormStats>& stats, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    out << "group,epoch,count,mean,stddev,separated,hist_lo,hist_hi,bins\n";
    for (const auto& s : stats) {
        out << s.group << "," << s.epoch << "," << s.count << "," << s.mean << "," << s.stddev
            << "," << (s.separated ? 1 : 0) << "," << s.hist_lo << "," << s.hist_hi << ",";
        for (std::size_t i = 0; i < s.histogram.size(); ++i) {
            if (i) out << ";";
            out << s.histogram[i];
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

void write_scores_csv(const std::vector<double>& scores, const std::vector<int>& membership,
                      const std::string& path) {
    if (scores.size() != membership.size()) {
        throw ArgumentError("scores and membership labels must align");
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    out << "example,score,member\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out << i << "," << scores[i] << "," << membership[i] << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

} // namespace mia
