#include "sifmi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "sifmi/common.hpp"

namespace sifmi {

double balanced_accuracy(const std::vector<int>& member_preds,
                         const std::vector<int>& nonmember_preds) {
    if (member_preds.empty() || nonmember_preds.empty())
        throw Error("balanced_accuracy needs nonempty prediction lists");
    long long correct = 0;
    for (int p : member_preds) correct += (p == 1);
    for (int p : nonmember_preds) correct += (p == 0);
    return static_cast<double>(correct) /
           static_cast<double>(member_preds.size() + nonmember_preds.size());
}

EvalReport eval_from_predictions(const std::string& attack_name,
                                 const std::vector<int>& member_preds,
                                 const std::vector<int>& nonmember_preds) {
    if (member_preds.empty() || nonmember_preds.empty())
        throw Error("eval needs nonempty prediction lists");
    EvalReport r;
    r.attack = attack_name;
    for (int p : member_preds) (p == 1 ? r.counts.tp : r.counts.fn)++;
    for (int p : nonmember_preds) (p == 1 ? r.counts.fp : r.counts.tn)++;
    r.n1 = static_cast<long long>(member_preds.size());
    r.n2 = static_cast<long long>(nonmember_preds.size());

    r.member_accuracy = static_cast<double>(r.counts.tp) / r.n1;
    r.member_recall = r.member_accuracy;
    if (r.counts.tp + r.counts.fp > 0)
        r.member_precision = static_cast<double>(r.counts.tp) / (r.counts.tp + r.counts.fp);
    r.nonmember_accuracy = static_cast<double>(r.counts.tn) / r.n2;
    r.nonmember_recall = r.nonmember_accuracy;
    if (r.counts.tn + r.counts.fn > 0)
        r.nonmember_precision = static_cast<double>(r.counts.tn) / (r.counts.tn + r.counts.fn);
    r.balanced_acc = static_cast<double>(r.counts.tp + r.counts.tn) / (r.n1 + r.n2);
    return r;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> opt_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["attack"] = attack;
    j["counts"] = {{"tp", counts.tp}, {"fn", counts.fn}, {"fp", counts.fp}, {"tn", counts.tn}};
    j["n1"] = n1;
    j["n2"] = n2;
    j["member"] = {{"accuracy", member_accuracy},
                   {"precision", opt_json(member_precision)},
                   {"recall", member_recall}};
    j["nonmember"] = {{"accuracy", nonmember_accuracy},
                      {"precision", opt_json(nonmember_precision)},
                      {"recall", nonmember_recall}};
    j["balanced_acc"] = balanced_acc;
    j["display"] = {{"member_accuracy", round3(member_accuracy)},
                    {"nonmember_accuracy", round3(nonmember_accuracy)},
                    {"balanced_acc", round3(balanced_acc)}};
    return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    EvalReport r;
    r.attack = j.at("attack").get<std::string>();
    r.counts.tp = j.at("counts").at("tp").get<long long>();
    r.counts.fn = j.at("counts").at("fn").get<long long>();
    r.counts.fp = j.at("counts").at("fp").get<long long>();
    r.counts.tn = j.at("counts").at("tn").get<long long>();
    r.n1 = j.at("n1").get<long long>();
    r.n2 = j.at("n2").get<long long>();
    r.member_accuracy = j.at("member").at("accuracy").get<double>();
    r.member_precision = opt_from(j.at("member").at("precision"));
    r.member_recall = j.at("member").at("recall").get<double>();
    r.nonmember_accuracy = j.at("nonmember").at("accuracy").get<double>();
    r.nonmember_precision = opt_from(j.at("nonmember").at("precision"));
    r.nonmember_recall = j.at("nonmember").at("recall").get<double>();
    r.balanced_acc = j.at("balanced_acc").get<double>();
    return r;
}

HistogramData histogram_export(const std::vector<SifRecord>& records, int bins) {
    if (bins < 1) throw ConfigError("histogram needs bins >= 1");
    if (records.empty()) throw Error("histogram needs at least one record");
    double lo = records[0].score, hi = records[0].score;
    for (const SifRecord& r : records) {
        if (r.membership != 0 && r.membership != 1)
            throw Error("histogram record lacks membership ground truth");
        lo = std::min(lo, r.score);
        hi = std::max(hi, r.score);
    }
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    double width = (hi - lo) / bins;

    HistogramData h;
    h.edges.resize(bins + 1);
    for (int b = 0; b <= bins; ++b) h.edges[b] = lo + width * b;
    h.member_counts.assign(bins, 0);
    h.nonmember_counts.assign(bins, 0);
    for (const SifRecord& r : records) {
        int idx = std::min(bins - 1, static_cast<int>((r.score - lo) / width));
        idx = std::max(idx, 0);
        (r.membership == 1 ? h.member_counts : h.nonmember_counts)[idx]++;
    }
    return h;
}

void write_histogram_csv(const HistogramData& hist, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write histogram '" + path + "'");
    out << "bin_left,bin_right,member_count,nonmember_count\n";
    char buf[160];
    for (std::size_t b = 0; b + 1 < hist.edges.size(); ++b) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%lld,%lld\n", hist.edges[b],
                      hist.edges[b + 1], hist.member_counts[b], hist.nonmember_counts[b]);
        out << buf;
    }
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return v[a] < v[b];
    });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw Error("spearman needs two equal-length series with >= 2 entries");
    std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= ra.size();
    mb /= rb.size();
    double num = 0, da2 = 0, db2 = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        double da = ra[i] - ma, db = rb[i] - mb;
        num += da * db;
        da2 += da * da;
        db2 += db * db;
    }
    if (da2 == 0 || db2 == 0) throw Error("spearman undefined for constant series");
    return num / std::sqrt(da2 * db2);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("quantile of empty series");
    if (q < 0 || q > 1) throw ConfigError("quantile level must be in [0,1]");
    std::sort(values.begin(), values.end());
    double pos = q * (values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    double frac = pos - lo;
    return values[lo] * (1 - frac) + values[hi] * frac;
}

double interquartile_range(const std::vector<double>& values) {
    return quantile(values, 0.75) - quantile(values, 0.25);
}

}  // namespace sifmi
