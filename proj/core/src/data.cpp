#include "acfseg/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "acfseg/loss.hpp"
#include "acfseg/rng.hpp"

namespace fs = std::filesystem;

namespace acfseg {

Sample raster_to_sample(const Raster& image, const Raster& labels) {
    if (image.channels != 3) throw std::invalid_argument("raster_to_sample: image must be 3-channel");
    if (labels.channels != 1) throw std::invalid_argument("raster_to_sample: labels must be 1-channel");
    if (image.height != labels.height || image.width != labels.width)
        throw std::invalid_argument("raster_to_sample: image " + std::to_string(image.width) + "x" +
                                    std::to_string(image.height) + " and label " +
                                    std::to_string(labels.width) + "x" + std::to_string(labels.height) +
                                    " dimensions differ");
    Sample s;
    s.height = image.height;
    s.width = image.width;
    s.image = Tensor({3, s.height, s.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x)
                s.image.data[static_cast<size_t>((int64_t(c) * s.height + y) * s.width + x)] =
                    float(image.at(y, x, c)) / 255.0f;
    s.labels.assign(labels.data.begin(), labels.data.end());
    return s;
}

Raster image_to_raster(const Tensor& chw) {
    if (chw.rank() != 3 || chw.dim(0) != 3)
        throw std::invalid_argument("image_to_raster: expected 3 x H x W");
    Raster r;
    r.channels = 3;
    r.height = chw.dim(1);
    r.width = chw.dim(2);
    r.data.resize(static_cast<size_t>(int64_t(r.height) * r.width * 3));
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = chw.data[static_cast<size_t>((int64_t(c) * r.height + y) * r.width + x)];
                r.at(y, x, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
            }
    return r;
}

Sample DatasetManifest::load(size_t index) const {
    const auto& [img_rel, lab_rel] = pairs.at(index);
    Raster img = read_ppm((fs::path(root) / img_rel).string());
    Raster lab = read_pgm((fs::path(root) / lab_rel).string());
    Sample s = raster_to_sample(img, lab);
    for (int32_t y : s.labels)
        if (y != kIgnoreId && y >= num_classes())
            throw std::runtime_error(lab_rel + ": label value " + std::to_string(y) +
                                     " exceeds class count");
    return s;
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open manifest");
    DatasetManifest m;
    m.root = fs::path(path).parent_path().string();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("classes", 0) == 0) {
            auto eq = line.find('=');
            if (eq == std::string::npos) throw std::runtime_error(path + ": malformed classes line");
            std::stringstream ss(line.substr(eq + 1));
            std::string name;
            while (std::getline(ss, name, ',')) {
                name.erase(0, name.find_first_not_of(" \t"));
                name.erase(name.find_last_not_of(" \t") + 1);
                if (!name.empty()) m.class_names.push_back(name);
            }
            continue;
        }
        std::istringstream ss(line);
        std::string img, lab;
        if (!(ss >> img >> lab)) throw std::runtime_error(path + ": malformed pair line: " + line);
        for (const auto& rel : {img, lab})
            if (!fs::exists(fs::path(m.root) / rel))
                throw std::runtime_error(path + ": referenced file missing: " + rel);
        m.pairs.emplace_back(img, lab);
    }
    if (m.class_names.empty()) throw std::runtime_error(path + ": manifest lists no classes");
    return m;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot write manifest");
    out << "classes = ";
    for (size_t i = 0; i < manifest.class_names.size(); ++i)
        out << (i ? "," : "") << manifest.class_names[i];
    out << "\n";
    for (const auto& [img, lab] : manifest.pairs) out << img << " " << lab << "\n";
}

namespace {

struct Rgb {
    float r, g, b;
};

// Per-class base colors; kept close enough in brightness that texture and
// shape matter, not color alone.
constexpr Rgb kBgA{0.36f, 0.42f, 0.36f};
constexpr Rgb kBgB{0.46f, 0.52f, 0.46f};
constexpr Rgb kClassBase[3] = {
    {0.62f, 0.38f, 0.38f},  // rectangle
    {0.38f, 0.40f, 0.62f},  // disk
    {0.58f, 0.55f, 0.32f},  // triangle
};

struct ShapeDraw {
    int kind;  // 0 rectangle, 1 disk, 2 triangle
    int cx, cy, r;
};

void render_image(const SyntheticSpec& spec, std::mt19937_64& rng, Raster& image, Raster& labels) {
    const int S = spec.image_size;
    image.height = image.width = S;
    image.channels = 3;
    image.data.assign(static_cast<size_t>(int64_t(S) * S * 3), 0);
    labels.height = labels.width = S;
    labels.channels = 1;
    labels.data.assign(static_cast<size_t>(int64_t(S) * S), 0);

    std::uniform_int_distribution<int> stripe_dist(4, 8);
    // Per-image, per-class color drift: pixel color alone is ambiguous across
    // the dataset, but within one image each class stays internally coherent.
    std::uniform_real_distribution<float> jitter_dist(-0.08f, 0.08f);
    const int stripe_w = stripe_dist(rng);
    float class_jitter[4][3];
    for (auto& row : class_jitter)
        for (float& v : row) v = jitter_dist(rng);

    const int num_fg_kinds = spec.num_classes - 1;
    std::uniform_int_distribution<int> count_dist(1, 3);
    std::uniform_int_distribution<int> kind_dist(0, num_fg_kinds - 1);
    std::uniform_int_distribution<int> pos_dist(S / 5, S - 1 - S / 5);
    std::uniform_int_distribution<int> rad_dist(S / 5, S / 3);
    const int num_shapes = count_dist(rng);
    std::vector<ShapeDraw> shapes;
    for (int i = 0; i < num_shapes; ++i)
        shapes.push_back({kind_dist(rng), pos_dist(rng), pos_dist(rng), rad_dist(rng)});

    std::normal_distribution<float> noise(0.0f, spec.noise_sigma);
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            int cls = 0;
            for (const auto& s : shapes) {
                bool inside = false;
                switch (s.kind) {
                    case 0:
                        inside = std::abs(x - s.cx) <= s.r && std::abs(y - s.cy) <= (2 * s.r) / 3;
                        break;
                    case 1: {
                        const int dx = x - s.cx, dy = y - s.cy;
                        inside = dx * dx + dy * dy <= s.r * s.r;
                        break;
                    }
                    case 2: {
                        const int dy = y - (s.cy - s.r);
                        inside = dy >= 0 && dy <= 2 * s.r &&
                                 std::abs(x - s.cx) * 3 <= 2 * dy;  // upright wedge
                        break;
                    }
                }
                if (inside) cls = s.kind + 1;  // later shapes draw on top
            }
            Rgb base{};
            float tex = 0.0f;
            if (cls == 0) {
                // diagonal stripe texture for the background
                base = ((x + 2 * y) / stripe_w) % 2 == 0 ? kBgA : kBgB;
            } else {
                base = kClassBase[cls - 1];
                switch (cls) {
                    case 1: tex = ((y / 3) % 2 == 0) ? 0.12f : -0.12f; break;
                    case 2: tex = (((x + y) / 4) % 2 == 0) ? 0.12f : -0.12f; break;
                    case 3: tex = ((x / 3) % 2 == 0) ? 0.12f : -0.12f; break;
                }
            }
            const float rgb[3] = {base.r, base.g, base.b};
            for (int c = 0; c < 3; ++c) {
                float v = rgb[c] + tex + class_jitter[cls][c] + noise(rng);
                image.at(y, x, c) =
                    static_cast<uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
            }
            labels.at(y, x) = static_cast<uint8_t>(cls);
        }
    }

    // Void band at class boundaries, as in real segmentation ground truth:
    // pixels whose 8-neighbourhood crosses a class edge are not annotated.
    Raster clean = labels;
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const uint8_t c0 = clean.at(y, x);
            bool edge = false;
            for (int dy = -1; dy <= 1 && !edge; ++dy)
                for (int dx = -1; dx <= 1 && !edge; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= S || nx < 0 || nx >= S) continue;
                    edge = clean.at(ny, nx) != c0;
                }
            if (edge) labels.at(y, x) = static_cast<uint8_t>(kIgnoreId);
        }
}

DatasetManifest generate_split(const SyntheticSpec& spec, const std::string& out_dir,
                               const std::string& split, int count) {
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "labels");
    auto rng = split_rng(spec.seed, "synthetic-" + split);

    DatasetManifest m;
    m.root = out_dir;
    m.class_names.push_back("background");
    for (int i = 1; i < spec.num_classes; ++i) m.class_names.push_back("class" + std::to_string(i));

    for (int i = 0; i < count; ++i) {
        Raster image, labels;
        // Regenerate on the (rare) all-foreground draw; the generator promises
        // background plus at least one foreground class per label map.
        for (int attempt = 0; attempt < 16; ++attempt) {
            render_image(spec, rng, image, labels);
            bool has_bg = false, has_fg = false;
            for (uint8_t v : labels.data) {
                if (v == 0) has_bg = true;
                else if (v != kIgnoreId) has_fg = true;
            }
            if (has_bg && has_fg) break;
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s_%05d", split.c_str(), i);
        const std::string img_rel = std::string("images/") + buf + ".ppm";
        const std::string lab_rel = std::string("labels/") + buf + ".pgm";
        write_ppm((fs::path(out_dir) / img_rel).string(), image);
        write_pgm((fs::path(out_dir) / lab_rel).string(), labels);
        m.pairs.emplace_back(img_rel, lab_rel);
    }
    write_manifest((fs::path(out_dir) / (split + ".manifest")).string(), m);
    return m;
}

}  // namespace

std::pair<DatasetManifest, DatasetManifest> generate_synthetic(const SyntheticSpec& spec,
                                                               const std::string& out_dir) {
    if (spec.num_classes < 2 || spec.num_classes > 4)
        throw std::invalid_argument("generate_synthetic: num_classes must be in [2,4]");
    if (spec.image_size < 16) throw std::invalid_argument("generate_synthetic: image_size too small");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error(out_dir + ": cannot create output directory");
    auto train = generate_split(spec, out_dir, "train", spec.train_images);
    auto val = generate_split(spec, out_dir, "val", spec.val_images);
    return {train, val};
}

}  // namespace acfseg
