#include "sifmi/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sifmi/common.hpp"

namespace sifmi {

std::string ScorerDescriptor::to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    j["r"] = lissa.repeats;
    j["d"] = lissa.depth;
    j["damping"] = lissa.damping;
    j["scale"] = lissa.scale;
    j["sample_batch"] = lissa.sample_batch;
    j["seed"] = lissa.seed;
    j["family"] = nlohmann::json::parse(family.to_json());
    j["grad_samples"] = grad_samples;
    j["ensemble_k"] = ensemble_k;
    return j.dump();
}

ScorerDescriptor ScorerDescriptor::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ScorerDescriptor d;
    d.kind = j.at("kind").get<std::string>();
    d.lissa.repeats = j.at("r").get<int>();
    d.lissa.depth = j.at("d").get<int>();
    d.lissa.damping = j.at("damping").get<double>();
    d.lissa.scale = j.at("scale").get<double>();
    d.lissa.sample_batch = j.at("sample_batch").get<int>();
    d.lissa.seed = j.at("seed").get<std::uint64_t>();
    d.family = AugmentationFamily::from_json(j.at("family").dump());
    d.grad_samples = j.at("grad_samples").get<int>();
    d.ensemble_k = j.at("ensemble_k").get<int>();
    return d;
}

ThresholdGrids threshold_grids(const std::vector<double>& member_scores, int grid_size) {
    if (member_scores.empty()) throw Error("threshold grids need at least one member score");
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
    double lo = member_scores[0], hi = member_scores[0];
    for (double s : member_scores) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    double delta = hi - lo;

    ThresholdGrids grids;
    grids.tau1.resize(grid_size);
    grids.tau2.resize(grid_size);
    if (delta > 0.0) {
        for (int i = 0; i < grid_size; ++i) {
            double f = static_cast<double>(i) / (grid_size - 1);
            grids.tau1[i] = (lo - delta / 2) + delta * f;
            grids.tau2[i] = (hi - delta / 2) + delta * f;
        }
    } else {
        // Degenerate spread: every candidate tau1 sits strictly below the
        // common value and every tau2 strictly above it.
        double eps = std::max(std::abs(lo) * 1e-6, 1e-12);
        for (int i = 0; i < grid_size; ++i) {
            grids.tau1[i] = lo - eps * static_cast<double>(grid_size - i) / grid_size;
            grids.tau2[i] = hi + eps * static_cast<double>(i + 1) / grid_size;
        }
    }
    return grids;
}

namespace {

void check_fit_records(const FitRecords& fit) {
    if (fit.members.empty()) throw Error("threshold fitting needs member records");
    if (fit.nonmembers.empty()) throw Error("threshold fitting needs non-member records");
}

std::vector<double> scores_of(const std::vector<SifRecord>& recs) {
    std::vector<double> out(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) out[i] = recs[i].score;
    return out;
}

// Scores of records whose label-match bit is set; only those can ever be
// predicted member.
std::vector<double> matched_scores_sorted(const std::vector<SifRecord>& recs) {
    std::vector<double> out;
    for (const SifRecord& r : recs)
        if (r.label_match == 1) out.push_back(r.score);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

ThresholdFit set_thresholds(const FitRecords& fit, int grid_size) {
    check_fit_records(fit);
    ThresholdGrids grids = threshold_grids(scores_of(fit.members), grid_size);
    const long long n1 = static_cast<long long>(fit.members.size());
    const long long n2 = static_cast<long long>(fit.nonmembers.size());

    std::vector<double> mem = matched_scores_sorted(fit.members);
    std::vector<double> nonmem = matched_scores_sorted(fit.nonmembers);

    auto count_le = [](const std::vector<double>& v, double t) {
        return static_cast<long long>(std::upper_bound(v.begin(), v.end(), t) - v.begin());
    };
    auto count_lt = [](const std::vector<double>& v, double t) {
        return static_cast<long long>(std::lower_bound(v.begin(), v.end(), t) - v.begin());
    };

    const int g = grid_size;
    std::vector<long long> mem_le(g), mem_lt(g), nm_le(g), nm_lt(g);
    for (int i = 0; i < g; ++i) {
        mem_le[i] = count_le(mem, grids.tau1[i]);
        nm_le[i] = count_le(nonmem, grids.tau1[i]);
        mem_lt[i] = count_lt(mem, grids.tau2[i]);
        nm_lt[i] = count_lt(nonmem, grids.tau2[i]);
    }

    // Algorithm: first strict improvement in (i, j) scan order wins.
    long long best = 0;
    double best_tau1 = -std::numeric_limits<double>::infinity();
    double best_tau2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g; ++i) {
        for (int j = 0; j < g; ++j) {
            long long mem_in = std::max(0LL, mem_lt[j] - mem_le[i]);
            long long nm_in = std::max(0LL, nm_lt[j] - nm_le[i]);
            long long correct = mem_in + (n2 - nm_in);
            if (correct > best) {
                best = correct;
                best_tau1 = grids.tau1[i];
                best_tau2 = grids.tau2[j];
            }
        }
    }
    ThresholdFit out;
    out.tau1 = best_tau1;
    out.tau2 = best_tau2;
    out.correct = best;
    out.balanced_acc = static_cast<double>(best) / static_cast<double>(n1 + n2);
    return out;
}

ThresholdFit set_thresholds_naive(const FitRecords& fit, int grid_size) {
    check_fit_records(fit);
    ThresholdGrids grids = threshold_grids(scores_of(fit.members), grid_size);
    const long long n1 = static_cast<long long>(fit.members.size());
    const long long n2 = static_cast<long long>(fit.nonmembers.size());

    long long best = 0;
    double best_tau1 = -std::numeric_limits<double>::infinity();
    double best_tau2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid_size; ++i) {
        double tau1 = grids.tau1[i];
        for (int j = 0; j < grid_size; ++j) {
            double tau2 = grids.tau2[j];
            long long correct = 0;
            for (const SifRecord& r : fit.members)
                if (tau1 < r.score && r.score < tau2 && r.label_match == 1) ++correct;
            for (const SifRecord& r : fit.nonmembers)
                if (!(tau1 < r.score && r.score < tau2 && r.label_match == 1)) ++correct;
            if (correct > best) {
                best = correct;
                best_tau1 = tau1;
                best_tau2 = tau2;
            }
        }
    }
    ThresholdFit out;
    out.tau1 = best_tau1;
    out.tau2 = best_tau2;
    out.correct = best;
    out.balanced_acc = static_cast<double>(best) / static_cast<double>(n1 + n2);
    return out;
}

std::string AttackModel::to_json() const {
    nlohmann::json j;
    j["tau1"] = tau1;
    j["tau2"] = tau2;
    j["scorer"] = nlohmann::json::parse(scorer.to_json());
    j["checkpoint_fingerprint"] = checkpoint_fingerprint;
    j["fit_balanced_acc"] = fit_balanced_acc;
    j["grid_size"] = grid_size;
    j["seed"] = seed;
    return j.dump(2);
}

AttackModel AttackModel::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    AttackModel a;
    a.tau1 = j.at("tau1").get<double>();
    a.tau2 = j.at("tau2").get<double>();
    a.scorer = ScorerDescriptor::from_json(j.at("scorer").dump());
    a.checkpoint_fingerprint = j.at("checkpoint_fingerprint").get<std::uint64_t>();
    a.fit_balanced_acc = j.at("fit_balanced_acc").get<double>();
    a.grid_size = j.at("grid_size").get<int>();
    a.seed = j.at("seed").get<std::uint64_t>();
    if (!(a.tau1 < a.tau2)) throw FormatError("attack model requires tau1 < tau2");
    return a;
}

void save_attack(const AttackModel& attack, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write attack model '" + path + "'");
    out << attack.to_json() << "\n";
}

AttackModel load_attack(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open attack model '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return AttackModel::from_json(ss.str());
}

AttackModel fit_sif_attack(const Checkpoint& ckpt, const FitRecords& records,
                           const ScorerDescriptor& scorer, int grid_size) {
    ThresholdFit fit = set_thresholds(records, grid_size);
    // The grid scan can settle on a collapsed pair when predicting nobody is
    // optimal; that is not a usable two-sided attack.
    if (!(fit.tau1 < fit.tau2))
        throw Error("threshold fit collapsed to an empty interval (tau1 >= tau2); "
                    "the scores carry no usable membership signal");
    AttackModel a;
    a.tau1 = fit.tau1;
    a.tau2 = fit.tau2;
    a.scorer = scorer;
    a.checkpoint_fingerprint = ckpt.fingerprint();
    a.fit_balanced_acc = fit.balanced_acc;
    a.grid_size = grid_size;
    a.seed = scorer.lissa.seed;
    return a;
}

AttackModel fit_sif_attack(const Checkpoint& ckpt, const std::vector<int>& mem_fit_ids,
                           const std::vector<int>& nonmem_fit_ids,
                           const std::function<SifRecord(int)>& score_one,
                           const ScorerDescriptor& scorer, int grid_size,
                           std::vector<int>* dropped) {
    FitRecords records;
    std::vector<int> failed;
    auto run = [&](const std::vector<int>& ids, std::vector<SifRecord>& out, int membership) {
        for (int id : ids) {
            try {
                SifRecord r = score_one(id);
                r.sample_id = id;
                r.membership = membership;
                out.push_back(r);
            } catch (const Error&) {
                failed.push_back(id);
            }
        }
    };
    run(mem_fit_ids, records.members, 1);
    run(nonmem_fit_ids, records.nonmembers, 0);

    std::size_t total = mem_fit_ids.size() + nonmem_fit_ids.size();
    if (!failed.empty() && failed.size() * 100 > total) {
        std::ostringstream os;
        os << "scorer failed on " << failed.size() << "/" << total << " samples (ids:";
        for (int id : failed) os << " " << id;
        os << ")";
        throw Error(os.str());
    }
    if (dropped) *dropped = failed;
    return fit_sif_attack(ckpt, records, scorer, grid_size);
}

int infer_membership(const AttackModel& attack, const Checkpoint& ckpt, double score,
                     int match) {
    if (attack.checkpoint_fingerprint != ckpt.fingerprint())
        throw Error("attack model was fitted against a different checkpoint");
    return (attack.tau1 < score && score < attack.tau2 && match == 1) ? 1 : 0;
}

int infer_membership(const AttackModel& attack, const Checkpoint& ckpt, const Sample& z,
                     double score) {
    return infer_membership(attack, ckpt, score, label_match(ckpt, z));
}

int gap_attack(const Checkpoint& ckpt, const Sample& z) { return label_match(ckpt, z); }

std::vector<double> blackbox_features(const Checkpoint& ckpt, const Sample& z) {
    Prediction p = predict(ckpt.spec, ckpt.params, z.input);
    std::vector<double> probs = p.probabilities;
    std::sort(probs.begin(), probs.end(), std::greater<double>());
    double py = std::max(p.probabilities[z.label], 1e-300);
    probs.push_back(-std::log(py));                       // cross-entropy loss
    probs.push_back(p.label == z.label ? 1.0 : 0.0);      // label-match bit
    return probs;
}

BlackboxAttack fit_blackbox_attack(const Checkpoint& ckpt, const LabeledDataset& dataset,
                                   const std::vector<int>& mem_fit_ids,
                                   const std::vector<int>& nonmem_fit_ids, double l2) {
    if (mem_fit_ids.empty() || nonmem_fit_ids.empty())
        throw Error("black-box attack needs nonempty member and non-member fit subsets");

    LabeledDataset feats;
    feats.name = "blackbox-features";
    feats.num_classes = 2;
    auto push = [&](const std::vector<int>& ids, int label) {
        for (int id : ids) {
            std::vector<double> f = blackbox_features(ckpt, dataset.sample(id));
            feats.inputs.push_back(Tensor::checked({f.size()}, f));
            feats.labels.push_back(label);
        }
    };
    push(mem_fit_ids, 1);
    push(nonmem_fit_ids, 0);

    std::size_t dim = feats.inputs[0].size();
    BlackboxAttack attack;
    attack.feature_mean.assign(dim, 0.0);
    attack.feature_std.assign(dim, 0.0);
    for (const Tensor& t : feats.inputs)
        for (std::size_t d = 0; d < dim; ++d) attack.feature_mean[d] += t.data[d];
    for (std::size_t d = 0; d < dim; ++d) attack.feature_mean[d] /= feats.inputs.size();
    for (const Tensor& t : feats.inputs)
        for (std::size_t d = 0; d < dim; ++d) {
            double delta = t.data[d] - attack.feature_mean[d];
            attack.feature_std[d] += delta * delta;
        }
    for (std::size_t d = 0; d < dim; ++d)
        attack.feature_std[d] = std::max(std::sqrt(attack.feature_std[d] / feats.inputs.size()),
                                         1e-8);
    for (Tensor& t : feats.inputs)
        for (std::size_t d = 0; d < dim; ++d)
            t.data[d] = (t.data[d] - attack.feature_mean[d]) / attack.feature_std[d];

    std::vector<int> all(feats.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    attack.spec = ModelSpec::logreg(static_cast<int>(dim), 2);
    attack.params = newton_minimize(attack.spec, feats, all, l2, 1e-8, 100);
    return attack;
}

int blackbox_predict(const BlackboxAttack& attack, const Checkpoint& ckpt, const Sample& z) {
    std::vector<double> f = blackbox_features(ckpt, z);
    for (std::size_t d = 0; d < f.size(); ++d)
        f[d] = (f[d] - attack.feature_mean[d]) / attack.feature_std[d];
    Tensor t = Tensor::checked({f.size()}, f);
    return predict(attack.spec, attack.params, t).label;
}

}  // namespace sifmi
