#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>

#include "acfseg/checkpoint.hpp"
#include "acfseg/data.hpp"
#include "acfseg/evaluation.hpp"
#include "acfseg/gradcheck.hpp"
#include "acfseg/train.hpp"

namespace fs = std::filesystem;
using namespace acfseg;

namespace {

SyntheticSpec parse_synthetic_spec(const std::string& path) {
    ConfigMap cfg = ConfigMap::parse_file(path);
    SyntheticSpec spec;
    spec.train_images = cfg.get_int("train_images", spec.train_images);
    spec.val_images = cfg.get_int("val_images", spec.val_images);
    spec.image_size = cfg.get_int("image_size", spec.image_size);
    spec.num_classes = cfg.get_int("num_classes", spec.num_classes);
    spec.noise_sigma = cfg.get_float("noise_sigma", spec.noise_sigma);
    spec.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
    cfg.finish();
    return spec;
}

AcfNet model_from_checkpoint(const Checkpoint& ckpt) {
    AcfNet model(network_config_from_checkpoint(ckpt));
    restore(ckpt, model);
    return model;
}

int run_gen_data(const std::string& spec_path, const std::string& out_dir, int64_t seed) {
    SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{} : parse_synthetic_spec(spec_path);
    if (seed >= 0) spec.seed = static_cast<uint64_t>(seed);
    auto [train, val] = generate_synthetic(spec, out_dir);
    std::cout << "wrote " << train.size() << " train / " << val.size() << " val images to "
              << out_dir << "\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& run_dir, int64_t seed) {
    TrainConfig config;
    if (!config_path.empty()) {
        ConfigMap cfg = ConfigMap::parse_file(config_path);
        config = parse_train_config(cfg);
        cfg.finish();
    }
    if (seed >= 0) config.seed = static_cast<uint64_t>(seed);
    auto train_set = read_manifest((fs::path(data_dir) / "train.manifest").string());
    auto val_set = read_manifest((fs::path(data_dir) / "val.manifest").string());
    TrainResult result = train(config, train_set, val_set, run_dir);
    std::cout << "final val mIoU (coarse): " << result.final_miou_coarse << "\n";
    if (!std::isnan(result.final_miou_fine))
        std::cout << "final val mIoU (fine):   " << result.final_miou_fine << "\n";
    std::cout << "checkpoint: " << result.final_checkpoint << "\n";
    return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir,
             std::vector<float> scales, bool flip, const std::string& report_path) {
    Checkpoint ckpt = read_checkpoint(ckpt_path);
    AcfNet model = model_from_checkpoint(ckpt);
    auto val_set = read_manifest((fs::path(data_dir) / "val.manifest").string());
    EvalConfig config;
    if (!scales.empty()) config.scales = std::move(scales);
    config.flip = flip;
    EvalReport report = evaluate(model, val_set, config);
    std::cout << "mIoU coarse: " << report.miou_coarse() << "\n";
    if (report.has_fine) std::cout << "mIoU fine:   " << report.miou_fine() << "\n";
    if (!report_path.empty()) {
        write_report_csv(report_path, report, val_set.class_names);
        std::cout << "report: " << report_path << "\n";
    }
    return 0;
}

int run_infer(const std::string& ckpt_path, const std::string& image_path,
              const std::string& out_path, std::vector<float> scales, bool flip) {
    Checkpoint ckpt = read_checkpoint(ckpt_path);
    AcfNet model = model_from_checkpoint(ckpt);
    Raster img = read_ppm(image_path);
    Raster dummy_labels;
    dummy_labels.height = img.height;
    dummy_labels.width = img.width;
    dummy_labels.channels = 1;
    dummy_labels.data.assign(static_cast<size_t>(int64_t(img.height) * img.width), 0);
    Sample s = raster_to_sample(img, dummy_labels);

    EvalConfig config;
    if (!scales.empty()) config.scales = std::move(scales);
    config.flip = flip;
    InferProbs probs = ms_flip_infer(model, s.image, config);
    const Tensor& used = model.config().variant == AcfVariant::None ? probs.coarse : probs.fine;

    Raster label_out;
    label_out.height = img.height;
    label_out.width = img.width;
    label_out.channels = 1;
    auto pred = argmax_classes(used);
    label_out.data.assign(pred.begin(), pred.end());
    write_pgm(out_path, label_out);

    const int64_t hw = int64_t(img.height) * img.width;
    const fs::path base(out_path);
    for (int c = 0; c < model.config().num_classes; ++c) {
        Raster prob_out = label_out;
        for (int64_t i = 0; i < hw; ++i)
            prob_out.data[static_cast<size_t>(i)] =
                static_cast<uint8_t>(std::lround(used[c * hw + i] * 255.0f));
        fs::path p = base.parent_path() / (base.stem().string() + "_prob" + std::to_string(c) + ".pgm");
        write_pgm(p.string(), prob_out);
    }
    std::cout << "wrote " << out_path << " and per-class probability maps\n";
    return 0;
}

int run_simmap(const std::string& ckpt_path, const std::string& image_path, int row, int col,
               const std::string& stage, const std::string& out_path) {
    Checkpoint ckpt = read_checkpoint(ckpt_path);
    AcfNet model = model_from_checkpoint(ckpt);
    Raster img = read_ppm(image_path);
    Tensor image({1, 3, img.height, img.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                image.at4(0, c, y, x) = float(img.at(y, x, c)) / 255.0f;

    auto out = model.forward(constant(image), /*train=*/false);
    NodePtr feat;
    if (stage == "coarse") {
        feat = out.top_feature;
    } else if (stage == "fine") {
        if (!out.fused_feature) throw std::runtime_error("baseline checkpoint has no fine stage");
        feat = out.fused_feature;
    } else {
        throw std::runtime_error("stage must be 'coarse' or 'fine'");
    }
    Tensor chw({feat->value.dim(1), feat->value.dim(2), feat->value.dim(3)});
    chw.data = feat->value.data;
    Tensor sim = feature_similarity_map(chw, row, col);
    write_pgm(out_path, similarity_to_pgm(sim));
    std::cout << "wrote " << out_path << " (" << sim.dim(1) << "x" << sim.dim(0) << ")\n";
    return 0;
}

int run_gradcheck(const std::string& op) {
    bool found = false, all_pass = true;
    for (const auto& c : gradcheck_suite()) {
        if (!op.empty() && c.name != op) continue;
        found = true;
        const double err = run_gradcheck_case(c);
        const bool pass = err < 1e-2;
        all_pass = all_pass && pass;
        std::cout << (pass ? "PASS" : "FAIL") << "  " << c.name << "  max_rel_err=" << err << "\n";
    }
    if (!found) throw std::runtime_error("no gradcheck case named '" + op + "'");
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ACF segmentation: coarse-to-fine semantic segmentation with class centers"};
    app.require_subcommand(1);
    int64_t seed = -1;  // -1: keep the config/spec seed

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic shapes dataset");
    std::string gen_spec, gen_out;
    gen->add_option("--spec", gen_spec, "synthetic spec file (key = value)");
    gen->add_option("--out", gen_out, "output dataset directory")->required();
    gen->add_option("--seed", seed, "override the spec seed");

    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_config, tr_data, tr_out;
    tr->add_option("--config", tr_config, "training config file");
    tr->add_option("--data", tr_data, "dataset directory (train/val manifests)")->required();
    tr->add_option("--out", tr_out, "run directory for checkpoints and metrics")->required();
    tr->add_option("--seed", seed, "override the config seed");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ev_ckpt, ev_data, ev_report;
    std::vector<float> ev_scales;
    bool ev_flip = false;
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--scales", ev_scales, "inference scales")->expected(-1);
    ev->add_flag("--flip", ev_flip, "left-right flip averaging");
    ev->add_option("--report", ev_report, "per-class IoU report CSV path");
    ev->add_option("--seed", seed);

    auto* in = app.add_subcommand("infer", "segment a single image");
    std::string in_ckpt, in_image, in_out;
    std::vector<float> in_scales;
    bool in_flip = false;
    in->add_option("--checkpoint", in_ckpt)->required();
    in->add_option("--image", in_image, "input PPM")->required();
    in->add_option("--out", in_out, "output label PGM")->required();
    in->add_option("--scales", in_scales)->expected(-1);
    in->add_flag("--flip", in_flip);
    in->add_option("--seed", seed);

    auto* sm = app.add_subcommand("simmap", "cosine feature-similarity map for an anchor pixel");
    std::string sm_ckpt, sm_image, sm_out, sm_stage = "fine";
    int sm_row = 0, sm_col = 0;
    sm->add_option("--checkpoint", sm_ckpt)->required();
    sm->add_option("--image", sm_image)->required();
    sm->add_option("--row", sm_row, "anchor row in feature coordinates")->required();
    sm->add_option("--col", sm_col, "anchor column in feature coordinates")->required();
    sm->add_option("--stage", sm_stage, "coarse|fine");
    sm->add_option("--out", sm_out)->required();
    sm->add_option("--seed", seed);

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    std::string gc_op;
    gc->add_option("--op", gc_op, "run a single named check");
    gc->add_option("--seed", seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen) return run_gen_data(gen_spec, gen_out, seed);
        if (*tr) return run_train(tr_config, tr_data, tr_out, seed);
        if (*ev) return run_eval(ev_ckpt, ev_data, ev_scales, ev_flip, ev_report);
        if (*in) return run_infer(in_ckpt, in_image, in_out, in_scales, in_flip);
        if (*sm) return run_simmap(sm_ckpt, sm_image, sm_row, sm_col, sm_stage, sm_out);
        if (*gc) return run_gradcheck(gc_op);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
