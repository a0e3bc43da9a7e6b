#include "maskforge/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "maskforge/image_io.hpp"
#include "maskforge/preprocess.hpp"

namespace maskforge {

namespace {

GeneratorConfig generator_config(const RunConfig& cfg) {
    GeneratorConfig g;
    g.depth = cfg.depth;
    g.base_channels = cfg.base_channels;
    g.channel_cap = cfg.channel_cap;
    g.in_channels = 1;
    g.out_channels = 1;
    g.image_size = cfg.image_size;
    return g;
}

DiscriminatorConfig discriminator_config(const RunConfig& cfg) {
    DiscriminatorConfig d;
    d.patch_size = cfg.patch_size;
    d.layers = cfg.d_layers;
    d.in_channels = 2;
    d.base_channels = cfg.d_base_channels;
    return d;
}

// Binds tape gradients to the owning parameter tensors, in the order the
// forward pass registered them.
std::vector<Adam::ParamGrad> collect_updates(
    std::vector<std::pair<std::string, Tensor4*>> params, const NamedVarsT<float>& vars,
    const Tape& tape) {
    std::vector<Adam::ParamGrad> updates;
    updates.reserve(vars.size());
    for (const auto& [name, var] : vars) {
        Tensor4* target = nullptr;
        for (auto& [pname, ptr] : params)
            if (pname == name) {
                target = ptr;
                break;
            }
        contract(target != nullptr, "optimizer update: unknown parameter " + name);
        updates.emplace_back(name, target, &tape.grad(var));
    }
    return updates;
}

Tensor4 flatten(const Tensor4& t) {
    Tensor4 out(Dims{1, 1, 1, static_cast<int>(t.numel())});
    out.data = t.data;
    return out;
}

Tensor4 reshape_to(const Tensor4& flat, const Dims& shape) {
    contract(flat.numel() == shape.numel(), "checkpoint: moment size " +
                                                std::to_string(flat.numel()) +
                                                " does not match parameter " + to_string(shape));
    Tensor4 out(shape);
    out.data = flat.data;
    return out;
}

CheckpointData::OptState pack_opt(const Adam& opt) {
    CheckpointData::OptState s;
    s.t = opt.t;
    for (const auto& [name, slot] : opt.slots)
        s.slots.emplace_back(name, flatten(slot.m), flatten(slot.v));
    return s;
}

void restore_opt(Adam& opt, const CheckpointData::OptState& s,
                 std::vector<std::pair<std::string, Tensor4*>> params) {
    opt.t = s.t;
    opt.slots.clear();
    for (const auto& [name, m, v] : s.slots) {
        Tensor4* param = nullptr;
        for (auto& [pname, ptr] : params)
            if (pname == name) {
                param = ptr;
                break;
            }
        if (!param) throw DataError("checkpoint: optimizer slot for unknown parameter " + name);
        Adam::Slot slot;
        slot.m = reshape_to(m, param->shape);
        slot.v = reshape_to(v, param->shape);
        opt.slots.emplace(name, std::move(slot));
    }
}

void check_finite(double v, const char* term, long long iteration) {
    if (!std::isfinite(v))
        throw NumericError("training aborted: non-finite " + std::string(term) +
                           " at iteration " + std::to_string(iteration));
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    Rng g_rng(Rng::mix(cfg.seed, 1));
    Rng d_rng(Rng::mix(cfg.seed, 2));
    gen_ = Generator::build(generator_config(cfg), g_rng);
    disc_ = Discriminator::build(discriminator_config(cfg), d_rng);
    opt_g_.cfg.lr = cfg.lr;
    opt_d_.cfg.lr = cfg.lr;
    aux_rng_ = Rng(Rng::mix(cfg.seed, 4));
    weights_.lambda = cfg.lambda;
    use_bce_ = cfg.loss_mode == "bce";
}

StepResult Trainer::discriminator_step(const Tensor4& target, const Tensor4& condition,
                                       const Tensor4& fake, long long iteration) {
    StepResult r;
    if (cfg_.freeze_discriminator) {
        Tensor4 real_scores = disc_.forward(target, condition, /*train=*/true);
        Tensor4 fake_scores = disc_.forward(fake, condition, /*train=*/true);
        if (use_bce_) {
            Tensor4 rp = sigmoid(real_scores), fp = sigmoid(fake_scores);
            r.d_loss = bce_gan_losses(rp, fp).first;
        } else {
            r.d_loss = lsgan_d_loss(real_scores, fake_scores);
        }
        check_finite(r.d_loss, "discriminator loss", iteration);
        r.d_acc_real = discriminator_accuracy(real_scores, true);
        r.d_acc_fake = discriminator_accuracy(fake_scores, false);
        return r;
    }

    Tape tape;
    NamedVarsT<float> d_params;
    Var x = tape.leaf(target);
    Var y = tape.leaf(condition);
    Var gx = tape.leaf(fake);
    Var real_scores = disc_.forward(tape, x, y, /*train=*/true, &d_params);
    Var fake_scores = disc_.forward(tape, gx, y, /*train=*/true, &d_params);
    Var loss = use_bce_
                   ? bce_gan_losses(sigmoid(real_scores), sigmoid(fake_scores)).first
                   : lsgan_d_loss(real_scores, fake_scores);
    r.d_loss = static_cast<double>(tape.value(loss).data[0]);
    check_finite(r.d_loss, "discriminator loss", iteration);
    // accuracies reflect the pre-update discriminator on raw scores
    r.d_acc_real = discriminator_accuracy(tape.value(real_scores), true);
    r.d_acc_fake = discriminator_accuracy(tape.value(fake_scores), false);
    tape.backward(loss);
    opt_d_.step(collect_updates(disc_.parameters(), d_params, tape));
    return r;
}

double Trainer::generator_step(const Tensor4& target, const Tensor4& condition,
                               long long iteration) {
    Tape tape;
    NamedVarsT<float> g_params;
    Var x = tape.leaf(target);
    Var y = tape.leaf(condition);
    Var gx = gen_.forward(tape, y, /*train=*/true, &g_params);
    Var obj;
    if (weights_.lambda == 0.0) {
        // adversarial term vanishes identically; skip the discriminator pass
        obj = l1_recon(x, gx);
    } else {
        Var fake_scores = disc_.forward(tape, gx, y, /*train=*/true, nullptr);
        if (use_bce_) {
            Var adv = mean(log_clamped(one_minus(sigmoid(fake_scores)), float(kLogFloor)));
            obj = add(mul_scalar(adv, static_cast<float>(weights_.lambda)), l1_recon(x, gx));
        } else {
            obj = generator_objective(fake_scores, x, gx, weights_);
        }
    }
    const double g_loss = static_cast<double>(tape.value(obj).data[0]);
    check_finite(g_loss, "generator objective", iteration);
    tape.backward(obj);
    opt_g_.step(collect_updates(gen_.parameters(), g_params, tape));
    return g_loss;
}

StepResult Trainer::train_step(const Tensor4& condition, const Tensor4& target,
                               long long iteration) {
    Tensor4 fake = gen_.forward(condition, /*train=*/true);  // detached for the D step
    StepResult r = discriminator_step(target, condition, fake, iteration);
    r.g_loss = generator_step(target, condition, iteration);
    return r;
}

StepResult Trainer::eval_step(const Tensor4& condition, const Tensor4& target) {
    StepResult r;
    Tensor4 fake = gen_.forward(condition, /*train=*/false);
    Tensor4 real_scores = disc_.forward(target, condition, /*train=*/false);
    Tensor4 fake_scores = disc_.forward(fake, condition, /*train=*/false);
    if (use_bce_) {
        Tensor4 rp = sigmoid(real_scores), fp = sigmoid(fake_scores);
        auto [d_loss, g_part] = bce_gan_losses(rp, fp);
        r.d_loss = d_loss;
        r.g_loss = cfg_.lambda * g_part + static_cast<double>(l1_recon(target, fake));
    } else {
        r.d_loss = lsgan_d_loss(real_scores, fake_scores);
        r.g_loss = generator_objective(fake_scores, target, fake, weights_);
    }
    r.d_acc_real = discriminator_accuracy(real_scores, true);
    r.d_acc_fake = discriminator_accuracy(fake_scores, false);
    return r;
}

Tensor4 Trainer::generate(const Tensor4& condition) {
    return gen_.forward(condition, /*train=*/false);
}

EvalResult Trainer::evaluate(const std::vector<TrainingPair>& holdout) {
    contract(!holdout.empty(), "evaluate: empty holdout set");
    double l1 = 0, sim = 0;
    for (const auto& pair : holdout) {
        Tensor4 fake = generate(pair.condition);
        l1 += static_cast<double>(l1_recon(pair.target, fake));
        sim += ssim(tensor_to_image(pair.target, 0, 0), tensor_to_image(fake, 0, 0));
    }
    const double n = static_cast<double>(holdout.size());
    return {l1 / n, sim / n};
}

CheckpointData Trainer::to_checkpoint() {
    CheckpointData data;
    for (auto& [name, t] : gen_.named_state()) data.tensors.emplace_back("g." + name, *t);
    for (auto& [name, t] : disc_.named_state()) data.tensors.emplace_back("d." + name, *t);
    data.opt_g = pack_opt(opt_g_);
    data.opt_d = pack_opt(opt_d_);
    data.rng_state = aux_rng_.state();
    data.iteration = static_cast<uint64_t>(iteration);
    data.ema = ema;
    return data;
}

void Trainer::restore(const CheckpointData& data) {
    auto g_state = gen_.named_state();
    auto d_state = disc_.named_state();
    const size_t expected = g_state.size() + d_state.size();
    if (data.tensors.size() != expected)
        throw DataError("checkpoint: has " + std::to_string(data.tensors.size()) +
                        " tensors, model wants " + std::to_string(expected));
    for (const auto& [name, value] : data.tensors) {
        Tensor4* dst = nullptr;
        if (name.rfind("g.", 0) == 0) {
            for (auto& [n, ptr] : g_state)
                if (n == name.substr(2)) {
                    dst = ptr;
                    break;
                }
        } else if (name.rfind("d.", 0) == 0) {
            for (auto& [n, ptr] : d_state)
                if (n == name.substr(2)) {
                    dst = ptr;
                    break;
                }
        }
        if (!dst) throw DataError("checkpoint: unknown tensor " + name);
        if (!(dst->shape == value.shape))
            throw DataError("checkpoint: tensor " + name + " has shape " + to_string(value.shape) +
                            ", model wants " + to_string(dst->shape));
        *dst = value;
    }
    restore_opt(opt_g_, data.opt_g, gen_.parameters());
    restore_opt(opt_d_, data.opt_d, disc_.parameters());
    aux_rng_.set_state(data.rng_state);
    iteration = static_cast<long long>(data.iteration);
    ema = data.ema;
}

// ---------------------------------------------------------------------------
// run loop
// ---------------------------------------------------------------------------

namespace {

void apply_ema(EmaState& ema, StepResult r, double decay, MetricsRow& row) {
    if (!ema.initialized) {
        ema.g_loss = r.g_loss;
        ema.d_loss = r.d_loss;
        ema.acc_real = r.d_acc_real;
        ema.acc_fake = r.d_acc_fake;
        ema.initialized = true;
    } else {
        ema.g_loss = ema_update(ema.g_loss, r.g_loss, decay);
        ema.d_loss = ema_update(ema.d_loss, r.d_loss, decay);
        ema.acc_real = ema_update(ema.acc_real, r.d_acc_real, decay);
        ema.acc_fake = ema_update(ema.acc_fake, r.d_acc_fake, decay);
    }
    row.g_loss = r.g_loss;
    row.d_loss = r.d_loss;
    row.d_acc_real = r.d_acc_real;
    row.d_acc_fake = r.d_acc_fake;
    row.g_loss_ema = ema.g_loss;
    row.d_loss_ema = ema.d_loss;
    row.acc_real_ema = ema.acc_real;
    row.acc_fake_ema = ema.acc_fake;
}

}  // namespace

void run_training(const RunConfig& cfg, const std::vector<TrainingPair>& data,
                  const std::string& out_dir, const std::string& resume_path) {
    cfg.validate();
    contract(static_cast<int64_t>(data.size()) > cfg.holdout,
             "training: need more pairs than the holdout size");
    std::vector<TrainingPair> train_split(data.begin(), data.end() - cfg.holdout);
    std::vector<TrainingPair> holdout(data.end() - cfg.holdout, data.end());
    contract(static_cast<int>(train_split.size()) >= cfg.batch_size,
             "training: fewer training pairs than batch_size");

    std::filesystem::create_directories(out_dir);
    const std::string metrics_path = out_dir + "/metrics.csv";
    const std::string eval_path = out_dir + "/eval.txt";

    Trainer trainer(cfg);
    BatchIterator batches(train_split, cfg.batch_size, Rng::mix(cfg.seed, 3));

    long long start = 0;
    bool resuming = false;
    if (!resume_path.empty()) {
        trainer.restore(load_checkpoint_file(resume_path));
        start = trainer.iteration;
        contract(start <= cfg.iterations,
                 "resume: checkpoint iteration " + std::to_string(start) +
                     " is past the configured " + std::to_string(cfg.iterations));
        resuming = true;
    }

    const bool append = resuming && std::filesystem::exists(metrics_path);
    std::ofstream csv(metrics_path, append ? std::ios::app : std::ios::trunc);
    if (!csv) throw DataError("cannot open " + metrics_path + " for writing");
    std::ofstream evals(eval_path, append ? std::ios::app : std::ios::trunc);
    if (!evals) throw DataError("cannot open " + eval_path + " for writing");
    if (!append) csv << kMetricsHeader << '\n' << std::flush;

    std::set<long long> milestones(cfg.milestones.begin(), cfg.milestones.end());
    auto milestone = [&](long long it) {
        const int samples = std::min<int>(cfg.grid_samples, static_cast<int>(holdout.size()));
        std::vector<Image2D> conds, gens, targs;
        for (int i = 0; i < samples; ++i) {
            const auto& pair = holdout[static_cast<size_t>(i)];
            Tensor4 fake = trainer.generate(pair.condition);
            conds.push_back(tensor_to_image(pair.condition, 0, 0));
            gens.push_back(tensor_to_image(fake, 0, 0));
            targs.push_back(tensor_to_image(pair.target, 0, 0));
        }
        export_sample_grid(conds, gens, targs,
                           out_dir + "/samples_iter_" + std::to_string(it) + ".pgm");
        EvalResult ev = trainer.evaluate(holdout);
        char line[128];
        std::snprintf(line, sizeof(line), "iter=%lld holdout_l1=%.9g holdout_ssim=%.9g",
                      it, ev.l1, ev.ssim);
        evals << line << '\n' << std::flush;
        save_checkpoint_file(out_dir + "/checkpoint_iter_" + std::to_string(it) + ".mfg",
                             trainer.to_checkpoint());
    };

    if (!resuming) {
        // Iteration 0: evaluation-only row that seeds the EMA stream.
        auto [y0, x0] = batches.batch(0);
        StepResult r = trainer.eval_step(y0, x0);
        MetricsRow row;
        row.iteration = 0;
        apply_ema(trainer.ema, r, cfg.ema_decay, row);
        csv << format_metrics_row(row) << '\n' << std::flush;
        if (milestones.count(0)) milestone(0);
    }

    for (long long it = start + 1; it <= cfg.iterations; ++it) {
        auto [y, x] = batches.batch(it - 1);
        StepResult r = trainer.train_step(y, x, it);
        trainer.iteration = it;
        MetricsRow row;
        row.iteration = it;
        apply_ema(trainer.ema, r, cfg.ema_decay, row);
        csv << format_metrics_row(row) << '\n' << std::flush;
        if (milestones.count(it)) milestone(it);
    }

    save_checkpoint_file(out_dir + "/checkpoint_final.mfg", trainer.to_checkpoint());
}

}  // namespace maskforge
