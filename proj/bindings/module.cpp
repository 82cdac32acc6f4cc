#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sifmi/attack.hpp"
#include "sifmi/config.hpp"
#include "sifmi/metrics.hpp"
#include "sifmi/pipeline.hpp"

namespace py = pybind11;
using namespace sifmi;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
    std::vector<double> data(a.data(), a.data() + a.size());
    return Tensor::checked(std::move(shape), std::move(data));
}

py::array_t<double> array_from_vector(const std::vector<double>& v) {
    py::array_t<double> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    py::array_t<double> out(shape);
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

ParamVector params_from_array(const ModelSpec& spec, const py::array_t<double>& a) {
    std::vector<double> data(a.data(), a.data() + a.size());
    return ParamVector(spec.layout(), std::move(data));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "self-influence membership inference core";

    py::register_exception<Error>(m, "SifmiError");

    py::class_<LabeledDataset>(m, "Dataset")
        .def_property_readonly("size", &LabeledDataset::size)
        .def_readonly("num_classes", &LabeledDataset::num_classes)
        .def_readonly("name", &LabeledDataset::name)
        .def("input", [](const LabeledDataset& d, int i) {
            return array_from_tensor(d.inputs.at(i));
        })
        .def("label", [](const LabeledDataset& d, int i) { return d.labels.at(i); });

    py::class_<MiSplit>(m, "Split")
        .def_readonly("mem_train", &MiSplit::mem_train)
        .def_readonly("mem_test", &MiSplit::mem_test)
        .def_readonly("nonmem_train", &MiSplit::nonmem_train)
        .def_readonly("nonmem_test", &MiSplit::nonmem_test)
        .def_readonly("validation", &MiSplit::validation)
        .def("to_json", &MiSplit::to_json)
        .def_static("from_json", &MiSplit::from_json);

    py::class_<AugmentationFamily>(m, "Augmentation")
        .def_static("identity", &AugmentationFamily::identity)
        .def_static("image_crop_flip", &AugmentationFamily::image_crop_flip, py::arg("pad"),
                    py::arg("flip_prob") = 0.5)
        .def_static("vector_jitter", &AugmentationFamily::vector_jitter, py::arg("sigma"));

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_static("logreg", &ModelSpec::logreg, py::arg("dim"), py::arg("classes"))
        .def_static("mlp", &ModelSpec::mlp, py::arg("dim"), py::arg("hidden"),
                    py::arg("classes"))
        .def_static("smallcnn", &ModelSpec::smallcnn, py::arg("in_channels"), py::arg("h"),
                    py::arg("w"), py::arg("channels"), py::arg("classes"))
        .def_property_readonly("param_count", &ModelSpec::param_count)
        .def("to_json", &ModelSpec::to_json);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("l2", &TrainConfig::l2)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("nesterov", &TrainConfig::nesterov)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("augmentation", &TrainConfig::augmentation)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_property(
            "lr_decay_enabled", [](const TrainConfig& c) { return c.lr_decay.enabled; },
            [](TrainConfig& c, bool v) { c.lr_decay.enabled = v; })
        .def_property(
            "lr_decay_patience", [](const TrainConfig& c) { return c.lr_decay.patience; },
            [](TrainConfig& c, int v) { c.lr_decay.patience = v; });

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readonly("best_epoch", &Checkpoint::best_epoch)
        .def_readonly("best_val_acc", &Checkpoint::best_val_acc)
        .def_readonly("l2", &Checkpoint::l2)
        .def_property_readonly("spec", [](const Checkpoint& c) { return c.spec; })
        .def_property_readonly("params",
                               [](const Checkpoint& c) { return array_from_vector(c.params.raw()); })
        .def("fingerprint", &Checkpoint::fingerprint)
        .def("save", &save_checkpoint)
        .def_static("load", &load_checkpoint);

    py::class_<LissaConfig>(m, "LissaConfig")
        .def(py::init<>())
        .def_readwrite("repeats", &LissaConfig::repeats)
        .def_readwrite("depth", &LissaConfig::depth)
        .def_readwrite("damping", &LissaConfig::damping)
        .def_readwrite("scale", &LissaConfig::scale)
        .def_readwrite("sample_batch", &LissaConfig::sample_batch)
        .def_readwrite("seed", &LissaConfig::seed);

    py::class_<SifRecord>(m, "SifRecord")
        .def_readonly("sample_id", &SifRecord::sample_id)
        .def_readonly("score", &SifRecord::score)
        .def_readonly("label_match", &SifRecord::label_match)
        .def_readonly("membership", &SifRecord::membership);

    py::class_<AttackModel>(m, "AttackModel")
        .def_readonly("tau1", &AttackModel::tau1)
        .def_readonly("tau2", &AttackModel::tau2)
        .def_readonly("fit_balanced_acc", &AttackModel::fit_balanced_acc)
        .def("to_json", &AttackModel::to_json)
        .def_static("from_json", &AttackModel::from_json);

    m.def("synth_blobs", &synth_blobs, py::arg("num_classes"), py::arg("dim"),
          py::arg("per_class"), py::arg("spread"), py::arg("seed"));
    m.def("load_idx", &load_idx, py::arg("images"), py::arg("labels"));
    m.def("load_csv", &load_csv, py::arg("path"));
    m.def("make_splits", &make_splits, py::arg("dataset"), py::arg("mem_size"), py::arg("seed"),
          py::arg("stratify") = true);

    m.def("train_target", &train_target, py::arg("spec"), py::arg("dataset"), py::arg("split"),
          py::arg("config"));
    m.def("predict", [](const Checkpoint& ckpt, const py::array_t<double>& x) {
        Prediction p = predict(ckpt.spec, ckpt.params, tensor_from_array(x));
        return py::make_tuple(p.label, array_from_vector(p.probabilities));
    });
    m.def("evaluate_accuracy", [](const Checkpoint& ckpt, const LabeledDataset& ds,
                                  const std::vector<int>& ids) {
        return evaluate_accuracy(ckpt, ds, ids);
    });

    m.def("forward_loss", [](const ModelSpec& spec, const py::array_t<double>& params,
                             const py::array_t<double>& x, const std::vector<int>& y,
                             double l2) {
        Batch b;
        b.inputs = tensor_from_array(x);
        b.labels = y;
        return forward_loss(spec, params_from_array(spec, params), b, l2);
    });
    m.def("grad", [](const ModelSpec& spec, const py::array_t<double>& params,
                     const py::array_t<double>& x, const std::vector<int>& y, double l2) {
        Batch b;
        b.inputs = tensor_from_array(x);
        b.labels = y;
        return array_from_vector(grad(spec, params_from_array(spec, params), b, l2).raw());
    });
    m.def("hvp", [](const ModelSpec& spec, const py::array_t<double>& params,
                    const py::array_t<double>& x, const std::vector<int>& y,
                    const py::array_t<double>& v, double l2) {
        Batch b;
        b.inputs = tensor_from_array(x);
        b.labels = y;
        return array_from_vector(hvp(spec, params_from_array(spec, params), b,
                                     params_from_array(spec, v), l2)
                                     .raw());
    });

    m.def(
        "sif_score",
        [](const Checkpoint& ckpt, const LabeledDataset& ds, const std::vector<int>& members,
           int sample_id, const LissaConfig& cfg) {
            LissaConfig c = cfg;
            c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(sample_id));
            HvpSampler sampler = make_train_sampler(ckpt, ds, members, c.sample_batch, c.seed);
            int default_depth = static_cast<int>(std::min<std::size_t>(members.size(), 1000));
            return sif(ckpt, sampler, ds.sample(sample_id), c, sample_id, default_depth);
        },
        py::arg("checkpoint"), py::arg("dataset"), py::arg("members"), py::arg("sample_id"),
        py::arg("config"));
    m.def(
        "ada_sif_score",
        [](const Checkpoint& ckpt, const LabeledDataset& ds, int sample_id,
           const AugmentationFamily& family, const LissaConfig& cfg, int grad_samples) {
            LissaConfig c = cfg;
            c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(sample_id));
            return ada_sif(ckpt, ds.sample(sample_id), family, c, grad_samples, sample_id);
        },
        py::arg("checkpoint"), py::arg("dataset"), py::arg("sample_id"), py::arg("family"),
        py::arg("config"), py::arg("grad_samples") = 128);
    m.def(
        "avg_sif_score",
        [](const Checkpoint& ckpt, const LabeledDataset& ds, const std::vector<int>& members,
           int sample_id, const AugmentationFamily& family, const LissaConfig& cfg, int k) {
            LissaConfig c = cfg;
            c.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(sample_id));
            return avg_sif(ckpt, ds, members, ds.sample(sample_id), family, c, k, sample_id);
        },
        py::arg("checkpoint"), py::arg("dataset"), py::arg("members"), py::arg("sample_id"),
        py::arg("family"), py::arg("config"), py::arg("k") = 8);

    m.def("set_thresholds", [](const std::vector<double>& mem_scores,
                               const std::vector<int>& mem_match,
                               const std::vector<double>& nonmem_scores,
                               const std::vector<int>& nonmem_match, int grid_size) {
        FitRecords fit;
        for (std::size_t i = 0; i < mem_scores.size(); ++i)
            fit.members.push_back({static_cast<int>(i), mem_scores[i], mem_match.at(i), 1});
        for (std::size_t i = 0; i < nonmem_scores.size(); ++i)
            fit.nonmembers.push_back(
                {static_cast<int>(i), nonmem_scores[i], nonmem_match.at(i), 0});
        ThresholdFit f = set_thresholds(fit, grid_size);
        return py::make_tuple(f.tau1, f.tau2, f.balanced_acc);
    }, py::arg("member_scores"), py::arg("member_match"), py::arg("nonmember_scores"),
       py::arg("nonmember_match"), py::arg("grid_size") = 1000);

    m.def("gap_attack", [](const Checkpoint& ckpt, const LabeledDataset& ds, int sample_id) {
        return gap_attack(ckpt, ds.sample(sample_id));
    });
    m.def("balanced_accuracy", &balanced_accuracy, py::arg("member_preds"),
          py::arg("nonmember_preds"));
    m.def("spearman", &spearman, py::arg("a"), py::arg("b"));
    m.def(
        "crop_flip",
        [](const py::array_t<double>& img, int pad, int oy, int ox, bool flip) {
            return array_from_tensor(crop_flip(tensor_from_array(img), pad, oy, ox, flip));
        },
        py::arg("image"), py::arg("pad"), py::arg("oy"), py::arg("ox"), py::arg("flip"));
}
