#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "sifmi/data.hpp"
#include "sifmi/influence.hpp"
#include "sifmi/train.hpp"

using namespace sifmi;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>(x >> 24));
    v.push_back(static_cast<unsigned char>(x >> 16));
    v.push_back(static_cast<unsigned char>(x >> 8));
    v.push_back(static_cast<unsigned char>(x));
}

}  // namespace

TEST_CASE("make_splits produces four equal subsets of mem_size/2") {
    LabeledDataset ds = synth_blobs(5, 6, 60, 2.0, 1);  // 300 samples
    MiSplit split = make_splits(ds, 100, 7);
    CHECK(split.mem_train.size() == 50);
    CHECK(split.mem_test.size() == 50);
    CHECK(split.nonmem_train.size() == 50);
    CHECK(split.nonmem_test.size() == 50);
    CHECK(split.validation.size() == 15);  // 5% of 300
}

TEST_CASE("split subsets are pairwise disjoint across many seeds") {
    LabeledDataset ds = synth_blobs(4, 5, 40, 2.0, 2);  // 160 samples
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        MiSplit split = make_splits(ds, 40, seed);
        std::set<int> seen;
        std::size_t total = 0;
        for (const auto* part :
             {&split.mem_train, &split.mem_test, &split.nonmem_train, &split.nonmem_test,
              &split.validation}) {
            for (int i : *part) seen.insert(i);
            total += part->size();
        }
        REQUIRE(seen.size() == total);
    }
}

TEST_CASE("same seed reproduces an identical split") {
    LabeledDataset ds = synth_blobs(3, 4, 80, 2.0, 3);
    MiSplit a = make_splits(ds, 60, 42);
    MiSplit b = make_splits(ds, 60, 42);
    CHECK(a.mem_train == b.mem_train);
    CHECK(a.mem_test == b.mem_test);
    CHECK(a.nonmem_train == b.nonmem_train);
    CHECK(a.nonmem_test == b.nonmem_test);
    CHECK(a.validation == b.validation);
    MiSplit c = make_splits(ds, 60, 43);
    CHECK(a.mem_train != c.mem_train);
}

TEST_CASE("stratified split keeps per-class counts within one") {
    LabeledDataset ds = synth_blobs(5, 4, 61, 2.0, 4);  // 305 samples
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        MiSplit split = make_splits(ds, 100, seed);
        auto class_counts = [&](const std::vector<int>& idx) {
            std::vector<int> c(ds.num_classes, 0);
            for (int i : idx) c[ds.labels[i]]++;
            return c;
        };
        auto a = class_counts(split.mem_train);
        auto b = class_counts(split.mem_test);
        auto c = class_counts(split.nonmem_train);
        auto d = class_counts(split.nonmem_test);
        for (int k = 0; k < ds.num_classes; ++k) {
            int lo = std::min({a[k], b[k], c[k], d[k]});
            int hi = std::max({a[k], b[k], c[k], d[k]});
            CHECK(hi - lo <= 1);
        }
    }
}

TEST_CASE("insufficient samples produce a counting error") {
    LabeledDataset ds = synth_blobs(2, 3, 30, 2.0, 5);  // 60 samples
    try {
        make_splits(ds, 40, 1);
        FAIL("expected size error");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("83") != std::string::npos);  // 2*40 + 3 validation
        CHECK(msg.find("60") != std::string::npos);
    }
    CHECK_THROWS_AS(make_splits(ds, 13, 1), ConfigError);  // odd mem_size
}

TEST_CASE("identity augmentation returns the sample bit-exactly") {
    LabeledDataset ds = synth_blobs(2, 7, 5, 1.0, 6);
    std::mt19937_64 rng(9);
    Sample s = ds.sample(3);
    Sample out = augment(AugmentationFamily::identity(), s, rng);
    CHECK(out.input.data == s.input.data);
    CHECK(out.label == s.label);
}

TEST_CASE("horizontal flip is an involution for a fixed crop") {
    Tensor img = Tensor::zeros({1, 6, 6});
    for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<double>(i) * 0.3;
    int pad = 2, oy = 1, ox = 3;
    Tensor cropped = crop_flip(img, pad, oy, ox, false);
    Tensor crop_flipped = crop_flip(img, pad, oy, ox, true);
    Tensor unflipped = crop_flip(crop_flipped, 0, 0, 0, true);
    CHECK(unflipped.data == cropped.data);
}

TEST_CASE("pad-4 crop offsets cover the full offset lattice") {
    Tensor img = Tensor::zeros({1, 32, 32});
    // A probe image whose (oy, ox) crop is identifiable from one pixel.
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) img.data[y * 32 + x] = y * 100.0 + x;
    AugmentationFamily fam = AugmentationFamily::image_crop_flip(4, 0.0);
    std::mt19937_64 rng(7);
    std::set<std::pair<int, int>> seen;
    Sample s{img, 0};
    for (int draw = 0; draw < 10000; ++draw) {
        Sample out = augment(fam, s, rng);
        // The center pixel (16,16) maps to source (16+oy-4, 16+ox-4), which
        // stays in-bounds for all offsets, so it decodes the offset pair.
        double v = out.input.data[16 * 32 + 16];
        int sy = static_cast<int>(v / 100.0);
        int sx = static_cast<int>(v) % 100;
        seen.insert({sy - 12, sx - 12});
    }
    CHECK(seen.size() == 81);
    for (const auto& [oy, ox] : seen) {
        CHECK(oy >= 0);
        CHECK(oy <= 8);
        CHECK(ox >= 0);
        CHECK(ox <= 8);
    }
}

TEST_CASE("augmentation never changes the label") {
    std::mt19937_64 rng(8);
    LabeledDataset imgs;
    imgs.num_classes = 3;
    imgs.name = "imgs";
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        Tensor t = Tensor::zeros({1, 8, 8});
        for (double& v : t.data) v = nd(rng);
        imgs.inputs.push_back(t);
        imgs.labels.push_back(i % 3);
    }
    std::vector<AugmentationFamily> families = {
        AugmentationFamily::identity(), AugmentationFamily::image_crop_flip(2, 0.5),
        AugmentationFamily::vector_jitter(0.3)};
    for (const auto& fam : families)
        for (int i = 0; i < 20; ++i) {
            Sample out = augment(fam, imgs.sample(i), rng);
            CHECK(out.label == imgs.labels[i]);
            CHECK(out.input.shape == imgs.inputs[i].shape);
        }
}

TEST_CASE("crop rejects incompatible shapes and offsets") {
    Tensor vec = Tensor::zeros({10});
    CHECK_THROWS_AS(crop_flip(vec, 1, 0, 0, false), DimensionError);
    Tensor img = Tensor::zeros({1, 4, 4});
    CHECK_THROWS_AS(crop_flip(img, 5, 0, 0, false), DimensionError);
    CHECK_THROWS_AS(crop_flip(img, 1, 3, 0, false), DimensionError);
    std::mt19937_64 rng(1);
    Sample s{vec, 0};
    CHECK_THROWS_AS(augment(AugmentationFamily::image_crop_flip(2, 0.5), s, rng),
                    DimensionError);
}

TEST_CASE("jitter with zero sigma is the identity in value") {
    LabeledDataset ds = synth_blobs(2, 5, 4, 1.0, 10);
    std::mt19937_64 rng(11);
    Sample out = augment(AugmentationFamily::vector_jitter(0.0), ds.sample(0), rng);
    for (std::size_t i = 0; i < out.input.size(); ++i)
        CHECK(out.input.data[i] == doctest::Approx(ds.inputs[0].data[i]).epsilon(1e-15));
}

TEST_CASE("well-separated blobs are linearly separable") {
    LabeledDataset ds = synth_blobs(2, 2, 30, 10.0, 1);
    CHECK(ds.size() == 60);
    std::vector<int> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    ModelSpec spec = ModelSpec::logreg(2, 2);
    ParamVector theta = newton_minimize(spec, ds, idx, 1e-4, 1e-9, 100);
    int hits = 0;
    for (int i : idx)
        if (predict(spec, theta, ds.inputs[i]).label == ds.labels[i]) ++hits;
    CHECK(hits == static_cast<int>(ds.size()));
}

TEST_CASE("blobs are deterministic per seed and sized num_classes*per_class") {
    LabeledDataset a = synth_blobs(3, 4, 17, 2.0, 99);
    LabeledDataset b = synth_blobs(3, 4, 17, 2.0, 99);
    CHECK(a.size() == 51);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.inputs[i].data == b.inputs[i].data);
        CHECK(a.labels[i] == b.labels[i]);
    }
    CHECK_THROWS_AS(synth_blobs(0, 4, 17, 2.0, 99), ConfigError);
    CHECK_THROWS_AS(synth_blobs(3, 4, 17, -1.0, 99), ConfigError);
}

TEST_CASE("idx loader reads a handcrafted fixture") {
    std::vector<unsigned char> img_bytes;
    push_be32(img_bytes, 0x00000803u);
    push_be32(img_bytes, 4);  // samples
    push_be32(img_bytes, 3);  // rows
    push_be32(img_bytes, 2);  // cols
    for (int i = 0; i < 4 * 3 * 2; ++i)
        img_bytes.push_back(static_cast<unsigned char>(i == 5 ? 255 : i));
    std::vector<unsigned char> lab_bytes;
    push_be32(lab_bytes, 0x00000801u);
    push_be32(lab_bytes, 4);
    for (unsigned char y : {1, 0, 2, 1}) lab_bytes.push_back(y);

    std::string img_path = temp_path("sifmi_fixture_images.idx");
    std::string lab_path = temp_path("sifmi_fixture_labels.idx");
    write_bytes(img_path, img_bytes);
    write_bytes(lab_path, lab_bytes);

    LabeledDataset ds = load_idx(img_path, lab_path);
    CHECK(ds.size() == 4);
    CHECK(ds.inputs[0].shape == std::vector<std::size_t>{1, 3, 2});
    CHECK(ds.labels == std::vector<int>{1, 0, 2, 1});
    CHECK(ds.num_classes == 3);
    CHECK(ds.inputs[0].data[5] == doctest::Approx(1.0));      // pixel 255 -> 1.0
    CHECK(ds.inputs[0].data[0] == doctest::Approx(0.0));
    CHECK(ds.inputs[1].data[0] == doctest::Approx(6.0 / 255.0));
}

TEST_CASE("idx loader rejects empty, truncated and mislabeled files") {
    std::string empty = temp_path("sifmi_empty.idx");
    write_bytes(empty, {});
    std::string lab = temp_path("sifmi_lab.idx");
    std::vector<unsigned char> lab_bytes;
    push_be32(lab_bytes, 0x00000801u);
    push_be32(lab_bytes, 1);
    lab_bytes.push_back(0);
    write_bytes(lab, lab_bytes);

    CHECK_THROWS_AS(load_idx(empty, lab), FormatError);

    std::vector<unsigned char> bad_magic;
    push_be32(bad_magic, 0x00000777u);
    std::string bad = temp_path("sifmi_badmagic.idx");
    write_bytes(bad, bad_magic);
    try {
        load_idx(bad, lab);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("byte offset 0") != std::string::npos);
    }

    std::vector<unsigned char> truncated;
    push_be32(truncated, 0x00000803u);
    push_be32(truncated, 2);
    push_be32(truncated, 4);
    push_be32(truncated, 4);
    truncated.push_back(7);  // far fewer than 32 pixels
    std::string trunc = temp_path("sifmi_trunc.idx");
    write_bytes(trunc, truncated);
    CHECK_THROWS_AS(load_idx(trunc, lab), FormatError);
}

TEST_CASE("csv loader round-trips a small table") {
    std::string path = temp_path("sifmi_table.csv");
    {
        std::ofstream out(path);
        out << "label,f0,f1,f2\n";
        out << "0,1.5,-2.0,0.25\n";
        out << "2,0.0,3.5,1.0\n";
    }
    LabeledDataset ds = load_csv(path);
    CHECK(ds.size() == 2);
    CHECK(ds.num_classes == 3);
    CHECK(ds.inputs[0].data == std::vector<double>{1.5, -2.0, 0.25});
    CHECK(ds.labels[1] == 2);

    std::string bad = temp_path("sifmi_bad.csv");
    {
        std::ofstream out(bad);
        out << "label,f0\n0,abc\n";
    }
    CHECK_THROWS_AS(load_csv(bad), FormatError);
}

TEST_CASE("split manifest json round-trips") {
    LabeledDataset ds = synth_blobs(3, 4, 50, 2.0, 13);
    MiSplit split = make_splits(ds, 40, 17);
    MiSplit back = MiSplit::from_json(split.to_json());
    CHECK(back.mem_train == split.mem_train);
    CHECK(back.mem_test == split.mem_test);
    CHECK(back.nonmem_train == split.nonmem_train);
    CHECK(back.nonmem_test == split.nonmem_test);
    CHECK(back.validation == split.validation);
    CHECK(back.seed == split.seed);
    CHECK(back.mem_size == split.mem_size);
}

TEST_CASE("member-only standardization centers the member subset") {
    LabeledDataset ds = synth_blobs(3, 5, 60, 3.0, 14);
    MiSplit split = make_splits(ds, 60, 19);
    ChannelStats stats = channel_stats(ds, split.members());
    standardize(ds, stats);
    ChannelStats after = channel_stats(ds, split.members());
    for (double m : after.mean) CHECK(std::abs(m) < 1e-9);
    for (double s : after.stddev) CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
}
