#include "acfseg/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "acfseg/checkpoint.hpp"
#include "acfseg/rng.hpp"

namespace fs = std::filesystem;

namespace acfseg {

TrainConfig parse_train_config(ConfigMap& config) {
    TrainConfig t;
    t.net.base_channels = config.get_int("base_channels", t.net.base_channels);
    t.net.reduced_channels = config.get_int("reduced_channels", t.net.reduced_channels);
    t.net.use_aspp = config.get_bool("use_aspp", t.net.use_aspp);
    t.net.aspp_dilations = config.get_int_list("aspp_dilations", t.net.aspp_dilations);
    t.net.aspp_branch_channels = config.get_int("aspp_branch_channels", t.net.aspp_branch_channels);
    t.net.variant = acf_variant_from_string(config.get_string("acf_variant", "sum"));

    t.optim.lr0 = config.get_float("lr0", t.optim.lr0);
    t.optim.momentum = config.get_float("momentum", t.optim.momentum);
    t.optim.weight_decay = config.get_float("weight_decay", t.optim.weight_decay);
    t.optim.max_iter = config.get_int("max_iter", t.optim.max_iter);
    t.optim.poly_power = config.get_float("poly_power", t.optim.poly_power);

    t.loss_weights.lambda_aux = config.get_float("lambda_aux", t.loss_weights.lambda_aux);
    t.loss_weights.lambda_coarse = config.get_float("lambda_coarse", t.loss_weights.lambda_coarse);
    t.loss_weights.lambda_fine = config.get_float("lambda_fine", t.loss_weights.lambda_fine);

    t.bootstrap.enabled = config.get_bool("bootstrap", t.bootstrap.enabled);
    t.bootstrap.theta = config.get_float("bootstrap_theta", t.bootstrap.theta);
    t.bootstrap.min_k = config.get_int("bootstrap_min_k", static_cast<int>(t.bootstrap.min_k));
    t.bootstrap_coarse = config.get_bool("bootstrap_coarse", t.bootstrap_coarse);

    t.aug.enabled = config.get_bool("augment", t.aug.enabled);
    t.aug.flip = config.get_bool("aug_flip", t.aug.flip);
    t.aug.scale_min = config.get_float("aug_scale_min", t.aug.scale_min);
    t.aug.scale_max = config.get_float("aug_scale_max", t.aug.scale_max);
    t.aug.crop = config.get_int("crop_size", t.aug.crop);

    t.batch_size = config.get_int("batch_size", t.batch_size);
    t.checkpoint_every = config.get_int("checkpoint_every", t.checkpoint_every);
    t.eval_every = config.get_int("eval_every", t.eval_every);

    if (t.batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
    if (t.optim.max_iter < 1) throw std::runtime_error("max_iter must be >= 1");
    if (t.bootstrap.theta <= 0.0f || t.bootstrap.theta > 1.0f)
        throw std::runtime_error("bootstrap_theta must be in (0, 1]");
    if (t.bootstrap.min_k < 1) throw std::runtime_error("bootstrap_min_k must be >= 1");
    return t;
}

TrainResult train(TrainConfig config, const DatasetManifest& train_set,
                  const DatasetManifest& val_set, const std::string& run_dir) {
    if (train_set.size() == 0) throw std::runtime_error("train: empty training set");
    config.net.num_classes = train_set.num_classes();
    fs::create_directories(run_dir);

    AcfNet model(config.net, config.seed);
    SgdOptimizer optimizer(model.registry(), config.optim);
    const bool has_fine = config.net.variant != AcfVariant::None;

    auto sample_rng = split_rng(config.seed, "sampling");
    auto aug_rng = split_rng(config.seed, "augment");

    // Desk-scale datasets fit in memory; load once.
    std::vector<Sample> cache;
    cache.reserve(train_set.size());
    for (size_t i = 0; i < train_set.size(); ++i) cache.push_back(train_set.load(i));

    const std::string csv_path = (fs::path(run_dir) / "metrics.csv").string();
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error(csv_path + ": cannot open for writing");
    csv << "iter,lr,loss_total,loss_aux,loss_coarse,loss_fine,val_miou\n";

    const bool prior_checks = finite_checks_enabled();
    set_finite_checks(true);

    BootstrapConfig no_bootstrap;
    std::uniform_int_distribution<size_t> pick(0, cache.size() - 1);

    TrainResult result;
    for (int iter = 0; iter < config.optim.max_iter; ++iter) {
        const float lr = poly_lr(iter, config.optim);

        std::vector<Sample> batch_samples;
        batch_samples.reserve(static_cast<size_t>(config.batch_size));
        for (int i = 0; i < config.batch_size; ++i)
            batch_samples.push_back(augment(cache[pick(sample_rng)], config.aug, aug_rng));
        SegBatch batch = stack_samples(batch_samples);

        model.registry().zero_grads();
        float la = 0.0f, lc = 0.0f, lf = 0.0f, lt = 0.0f;
        try {
            auto out = model.forward(constant(batch.images), /*train=*/true);
            auto weights = inverse_frequency_weights(batch.labels, config.net.num_classes);
            NodePtr aux_loss = balanced_ce(out.aux_logits, batch.labels, weights);
            NodePtr coarse_loss =
                balanced_ce(out.coarse_logits, batch.labels, weights, kIgnoreId,
                            config.bootstrap_coarse ? config.bootstrap : no_bootstrap);
            NodePtr fine_loss;
            if (has_fine)
                fine_loss = balanced_ce(out.fine_logits, batch.labels, weights, kIgnoreId,
                                        config.bootstrap);
            NodePtr loss = total_loss(aux_loss, coarse_loss, fine_loss, config.loss_weights);
            la = aux_loss->value[0];
            lc = coarse_loss->value[0];
            lf = has_fine ? fine_loss->value[0] : 0.0f;
            lt = loss->value[0];
            backward(loss);
        } catch (const std::runtime_error& e) {
            set_finite_checks(prior_checks);
            throw std::runtime_error("training aborted at iteration " + std::to_string(iter) +
                                     ": " + e.what());
        }
        optimizer.step(lr);

        csv << iter << "," << lr << "," << lt << "," << la << "," << lc << ",";
        if (has_fine) csv << lf;
        csv << ",";

        const bool last = iter + 1 == config.optim.max_iter;
        if (val_set.size() > 0 && (last || (iter + 1) % config.eval_every == 0)) {
            EvalReport report = evaluate(model, val_set, EvalConfig{});
            const double miou = report.has_fine ? report.miou_fine() : report.miou_coarse();
            csv << miou;
            if (last) {
                result.final_miou_coarse = report.miou_coarse();
                result.final_miou_fine =
                    report.has_fine ? report.miou_fine() : std::nan("");
            }
        }
        csv << "\n";

        if (last || (iter + 1) % config.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_%06d.ckpt", iter + 1);
            const std::string path = (fs::path(run_dir) / name).string();
            write_checkpoint(path, snapshot(model, static_cast<uint64_t>(iter + 1), &optimizer));
            if (last) {
                result.final_checkpoint = (fs::path(run_dir) / "checkpoint_final.ckpt").string();
                write_checkpoint(result.final_checkpoint,
                                 snapshot(model, static_cast<uint64_t>(iter + 1), &optimizer));
            }
        }
    }
    set_finite_checks(prior_checks);
    result.metrics_csv = csv_path;
    return result;
}

}  // namespace acfseg
