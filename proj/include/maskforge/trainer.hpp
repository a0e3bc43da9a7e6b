#pragma once

#include <string>
#include <vector>

#include "maskforge/adam.hpp"
#include "maskforge/checkpoint.hpp"
#include "maskforge/config.hpp"
#include "maskforge/dataset.hpp"
#include "maskforge/losses.hpp"
#include "maskforge/metrics.hpp"
#include "maskforge/models.hpp"
#include "maskforge/rng.hpp"

namespace maskforge {

// ---------------------------------------------------------------------------
// trainer: owns both networks, their optimizers, and the loop bookkeeping.
// ---------------------------------------------------------------------------

struct StepResult {
    double g_loss = 0.0;
    double d_loss = 0.0;
    double d_acc_real = 0.0;
    double d_acc_fake = 0.0;
};

struct EvalResult {
    double l1 = 0.0;
    double ssim = 0.0;
};

class Trainer {
  public:
    explicit Trainer(const RunConfig& cfg);

    // One optimization iteration on a batch: discriminator update on detached
    // generator output, then generator update on a fresh graph.  `iteration`
    // is used only for diagnostics.
    StepResult train_step(const Tensor4& condition, const Tensor4& target,
                          long long iteration);

    // Loss/accuracy snapshot without touching any state (inference-mode
    // forwards, no optimizer steps).  Used for the iteration-0 row.
    StepResult eval_step(const Tensor4& condition, const Tensor4& target);

    // Mean L1 / SSIM of generated-vs-target over held-out pairs.
    EvalResult evaluate(const std::vector<TrainingPair>& holdout);

    Tensor4 generate(const Tensor4& condition);

    CheckpointData to_checkpoint();
    void restore(const CheckpointData& data);

    Generator& generator() { return gen_; }
    Discriminator& discriminator() { return disc_; }
    const Generator& generator() const { return gen_; }
    const Discriminator& discriminator() const { return disc_; }

    long long iteration = 0;
    EmaState ema;

  private:
    StepResult discriminator_step(const Tensor4& target, const Tensor4& condition,
                                  const Tensor4& fake, long long iteration);
    double generator_step(const Tensor4& target, const Tensor4& condition,
                          long long iteration);

    RunConfig cfg_;
    Generator gen_;
    Discriminator disc_;
    Adam opt_g_;
    Adam opt_d_;
    Rng aux_rng_{0};  // reserved noise stream; serialized so resume is exact
    ObjectiveWeights weights_;
    bool use_bce_ = false;
};

// Runs the configured number of iterations over `data`, writing metrics.csv,
// milestone sample grids, eval.txt, and checkpoints into out_dir.  The last
// `holdout` pairs of `data` are never trained on.  When resume_path is
// non-empty the trainer state is restored from it and iterations continue
// from the recorded position, appending to an existing metrics.csv.
void run_training(const RunConfig& cfg, const std::vector<TrainingPair>& data,
                  const std::string& out_dir, const std::string& resume_path = "");

}  // namespace maskforge
