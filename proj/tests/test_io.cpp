#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "acfseg/checkpoint.hpp"
#include "acfseg/config.hpp"
#include "acfseg/data.hpp"
#include "acfseg/loss.hpp"
#include "acfseg/netpbm.hpp"
#include "oracles.hpp"

using namespace acfseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("ppm and pgm round-trip") {
    TempDir dir("tmp_test_io_pnm");

    Raster white;
    white.height = 1;
    white.width = 1;
    white.channels = 3;
    white.data = {255, 255, 255};
    write_ppm(dir.file("w.ppm"), white);
    Raster back = read_ppm(dir.file("w.ppm"));
    CHECK(back.height == 1);
    CHECK(back.width == 1);
    CHECK(back.data == white.data);

    std::mt19937_64 rng(3);
    Raster gray;
    gray.height = 5;
    gray.width = 7;
    gray.channels = 1;
    gray.data.resize(35);
    for (auto& v : gray.data) v = uint8_t(rng() & 0xFF);
    write_pgm(dir.file("g.pgm"), gray);
    Raster gback = read_pgm(dir.file("g.pgm"));
    CHECK(gback.data == gray.data);
    CHECK(gback.channels == 1);
}

TEST_CASE("pnm headers with comments parse") {
    TempDir dir("tmp_test_io_comment");
    std::ofstream out(dir.file("c.pgm"), std::ios::binary);
    out << "P5\n# a comment line\n2 1\n# another\n255\n";
    out.put(char(7));
    out.put(char(9));
    out.close();
    Raster r = read_pgm(dir.file("c.pgm"));
    CHECK(r.width == 2);
    CHECK(r.height == 1);
    CHECK(r.data == std::vector<uint8_t>{7, 9});
}

TEST_CASE("malformed pnm files are rejected with diagnostics") {
    TempDir dir("tmp_test_io_bad");

    {
        std::ofstream out(dir.file("trunc.pgm"), std::ios::binary);
        out << "P5\n4 4\n255\n";
        out.put(char(1));  // 1 byte instead of 16
    }
    CHECK_THROWS_AS(read_pgm(dir.file("trunc.pgm")), std::runtime_error);

    {
        std::ofstream out(dir.file("maxval.pgm"), std::ios::binary);
        out << "P5\n1 1\n65535\n";
        out.put(char(0));
        out.put(char(0));
    }
    CHECK_THROWS_AS(read_pgm(dir.file("maxval.pgm")), std::runtime_error);

    {
        std::ofstream out(dir.file("ascii.pgm"), std::ios::binary);
        out << "P2\n1 1\n255\n0\n";
    }
    CHECK_THROWS_AS(read_pgm(dir.file("ascii.pgm")), std::runtime_error);
}

TEST_CASE("image tensor to raster round-trip") {
    std::mt19937_64 rng(5);
    Raster img;
    img.height = 4;
    img.width = 6;
    img.channels = 3;
    img.data.resize(4 * 6 * 3);
    for (auto& v : img.data) v = uint8_t(rng() & 0xFF);
    Raster labels;
    labels.height = 4;
    labels.width = 6;
    labels.channels = 1;
    labels.data.assign(24, 2);

    Sample s = raster_to_sample(img, labels);
    CHECK(s.image.shape == Shape{3, 4, 6});
    for (float v : s.image.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    Raster back = image_to_raster(s.image);
    CHECK(back.data == img.data);
}

TEST_CASE("checkpoint round-trip preserves tensors, names and iteration") {
    TempDir dir("tmp_test_io_ckpt");
    std::mt19937_64 rng(7);
    Checkpoint ckpt;
    ckpt.iteration = 1234567;
    ckpt.tensors.emplace_back("a/weight", oracles::random_tensor({2, 3, 4}, rng));
    ckpt.tensors.emplace_back("b", oracles::random_tensor({5}, rng));
    write_checkpoint(dir.file("x.ckpt"), ckpt);

    Checkpoint back = read_checkpoint(dir.file("x.ckpt"));
    CHECK(back.iteration == ckpt.iteration);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensors[0].first == "a/weight");
    CHECK(back.tensors[0].second.shape == Shape{2, 3, 4});
    CHECK(back.tensors[0].second.data == ckpt.tensors[0].second.data);
    CHECK(back.find("b") != nullptr);
    CHECK(back.find("missing") == nullptr);

    const std::string bytes = slurp(dir.file("x.ckpt"));
    CHECK(bytes.substr(0, 4) == "ACFS");
}

TEST_CASE("checkpoint loader rejects garbage and truncation") {
    TempDir dir("tmp_test_io_ckpt_bad");
    {
        std::ofstream out(dir.file("bad.ckpt"), std::ios::binary);
        out << "NOPE";
    }
    CHECK_THROWS_AS(read_checkpoint(dir.file("bad.ckpt")), std::runtime_error);

    Checkpoint ckpt;
    ckpt.tensors.emplace_back("t", Tensor({8}, 1.0f));
    write_checkpoint(dir.file("ok.ckpt"), ckpt);
    const std::string bytes = slurp(dir.file("ok.ckpt"));
    {
        std::ofstream out(dir.file("cut.ckpt"), std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size() - 10));
    }
    CHECK_THROWS_AS(read_checkpoint(dir.file("cut.ckpt")), std::runtime_error);
}

TEST_CASE("config parsing: types, comments, unknown keys") {
    auto cfg = ConfigMap::parse_string(
        "# a comment\n"
        "alpha = 0.5\n"
        "count = 7\n"
        "flag = true\n"
        "name = hello\n"
        "dims = 2,4,6\n");
    CHECK(cfg.get_float("alpha", 0.0f) == doctest::Approx(0.5f));
    CHECK(cfg.get_int("count", 0) == 7);
    CHECK(cfg.get_bool("flag", false) == true);
    CHECK(cfg.get_string("name", "") == "hello");
    CHECK(cfg.get_int_list("dims", {}) == std::vector<int>{2, 4, 6});
    CHECK(cfg.get_int("absent", 42) == 42);
    CHECK_NOTHROW(cfg.finish());

    auto leftover = ConfigMap::parse_string("known = 1\nmystery = 2\n");
    leftover.get_int("known", 0);
    CHECK_THROWS(leftover.finish());

    CHECK_THROWS(ConfigMap::parse_string("a = 1\na = 2\n"));
    auto bad_int = ConfigMap::parse_string("n = pear\n");
    CHECK_THROWS(bad_int.get_int("n", 0));
}

TEST_CASE("manifest round-trip and validation") {
    TempDir dir("tmp_test_io_manifest");
    SyntheticSpec spec;
    spec.train_images = 3;
    spec.val_images = 2;
    spec.image_size = 24;
    spec.seed = 11;
    auto [train_set, val_set] = generate_synthetic(spec, dir.path.string());
    CHECK(train_set.size() == 3);
    CHECK(val_set.size() == 2);
    CHECK(train_set.num_classes() == 4);

    DatasetManifest reread = read_manifest((dir.path / "train.manifest").string());
    CHECK(reread.size() == 3);
    CHECK(reread.class_names == train_set.class_names);
    Sample s = reread.load(0);
    CHECK(s.height == 24);
    for (int32_t l : s.labels) {
        CHECK(l >= 0);
        CHECK((l < 4 || l == kIgnoreId));  // boundary pixels carry the void id
    }

    // referencing a missing file is rejected up front
    {
        std::ofstream out(dir.file("broken.manifest"));
        out << "classes = a,b\nmissing.ppm missing.pgm\n";
    }
    CHECK_THROWS(read_manifest(dir.file("broken.manifest")));

    // image/label dimension mismatch is rejected at load
    Raster img;
    img.height = 4;
    img.width = 4;
    img.channels = 3;
    img.data.assign(48, 100);
    write_ppm(dir.file("img.ppm"), img);
    Raster lab;
    lab.height = 3;
    lab.width = 3;
    lab.channels = 1;
    lab.data.assign(9, 0);
    write_pgm(dir.file("lab.pgm"), lab);
    {
        std::ofstream out(dir.file("mismatch.manifest"));
        out << "classes = a,b\nimg.ppm lab.pgm\n";
    }
    DatasetManifest mm = read_manifest(dir.file("mismatch.manifest"));
    CHECK_THROWS(mm.load(0));
}

TEST_CASE("synthetic generation is byte-deterministic and labels stay in range") {
    TempDir a("tmp_test_io_syn_a");
    TempDir b("tmp_test_io_syn_b");
    SyntheticSpec spec;
    spec.train_images = 4;
    spec.val_images = 2;
    spec.image_size = 32;
    spec.seed = 21;
    auto [ta, va] = generate_synthetic(spec, a.path.string());
    auto [tb, vb] = generate_synthetic(spec, b.path.string());

    for (size_t i = 0; i < ta.size(); ++i) {
        CHECK(slurp((fs::path(ta.root) / ta.pairs[i].first).string()) ==
              slurp((fs::path(tb.root) / tb.pairs[i].first).string()));
        CHECK(slurp((fs::path(ta.root) / ta.pairs[i].second).string()) ==
              slurp((fs::path(tb.root) / tb.pairs[i].second).string()));
    }

    bool has_fg = false;
    for (size_t i = 0; i < ta.size(); ++i) {
        Sample s = ta.load(i);
        bool bg = false, fg = false;
        for (int32_t l : s.labels) {
            CHECK(l >= 0);
            CHECK((l < 4 || l == kIgnoreId));
            if (l == 0) bg = true;
            else if (l != kIgnoreId) fg = true;
        }
        CHECK(bg);
        CHECK(fg);
        has_fg = has_fg || fg;
    }
    CHECK(has_fg);
}
