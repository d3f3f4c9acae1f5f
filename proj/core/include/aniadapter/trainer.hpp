#pragma once

#include <map>
#include <string>
#include <vector>

#include "aniadapter/attention.hpp"
#include "aniadapter/config.hpp"
#include "aniadapter/denoiser.hpp"
#include "aniadapter/dropout.hpp"
#include "aniadapter/encoder.hpp"
#include "aniadapter/pose.hpp"
#include "aniadapter/schedule.hpp"
#include "aniadapter/sites.hpp"
#include "aniadapter/text_encoder.hpp"

namespace aniadapter {

struct TrainingSample {
    std::string id;
    Image image;
    std::string prompt;
    TokenMask mask;
    PoseSkeleton skeleton;
};

struct TrainerConfig {
    int steps = 200;
    int batch_size = 16;
    double lr = 1e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    DropoutMode dropout_mode = DropoutMode::reinterpreted;
    ControllerKind controller = ControllerKind::t2i_adapter;
    InjectScope scope = InjectScope::full_blocks;
    double gamma = 1.0;
    double neg_bias = 1e4;
    uint64_t seed = 7;
    int checkpoint_every = 1000;
    EncoderSpec encoder{28, 28, 7, 16, 4, 4, 16};
    int latent_h = 28;
    int latent_w = 28;
    std::string schedule_kind = "geometric";  // or "linear"
    int schedule_T = 10;

    static TrainerConfig from_config(const Config& cfg);
    Config to_config() const;
};

struct FreezeReport {
    bool ok = true;
    std::vector<std::string> mutated;
};

// Everything that receives gradient updates.
struct TrainableState {
    AggregatorParams agg;
    InjectionSites sites;
};

// Batch-averaged gradients over the trainable tensors.
struct AdapterGrads {
    Vec dalphas;
    std::vector<Mat> dproj;
    Vec dln_gamma, dln_beta;
    std::map<std::string, std::pair<Mat, Mat>> dsites;  // site id -> (dWk, dWv)
};

class Trainer {
public:
    Trainer(TrainerConfig cfg, VisionBackend& vision, TextBackend& text,
            SurrogateDenoiser& denoiser, PoseController& controller,
            const NoiseSchedule& schedule);

    // One optimizer step over cfg.batch_size samples drawn round-robin.
    double train_step(const std::vector<TrainingSample>& samples);
    std::vector<double> run(const std::vector<TrainingSample>& samples, int steps);

    // Gradients for the next batch without applying an update. Consumes RNG
    // and cursor state exactly as a step would.
    AdapterGrads compute_batch_gradients(const std::vector<TrainingSample>& samples,
                                         double* mean_loss = nullptr);

    TrainableState& state() { return state_; }
    const TrainerConfig& config() const { return cfg_; }
    int step_count() const { return step_; }
    int controller_feed_count() const { return controller_feeds_; }

    FreezeReport freeze_audit() const;

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);

private:
    AdapterGrads zero_grads() const;
    void accumulate_sample(const TrainingSample& sample, AdapterGrads& grads, double& loss_acc);
    void apply_update(const AdapterGrads& grads);
    void adam_update(const std::string& name, Eigen::Ref<Mat> param, const Mat& grad,
                     bool decay);
    std::map<std::string, uint64_t> hash_frozen() const;

    TrainerConfig cfg_;
    VisionBackend& vision_;
    TextBackend& text_;
    SurrogateDenoiser& denoiser_;
    PoseController& controller_;
    NoiseSchedule schedule_;
    TrainableState state_;
    Rng rng_;
    int step_ = 0;
    int controller_feeds_ = 0;
    size_t cursor_ = 0;
    std::map<std::string, Mat> adam_m_, adam_v_;
    int adam_t_ = 0;
    std::map<std::string, uint64_t> frozen_baseline_;
    std::map<std::string, LayerStack> stack_cache_;
};

// Checkpoint writer/reader shared by trainer and inference.
void save_adapter_checkpoint(const std::string& path, const TrainableState& state,
                             const TrainerConfig& cfg, int step,
                             const std::map<std::string, Mat>& adam_m = {},
                             const std::map<std::string, Mat>& adam_v = {});
struct LoadedCheckpoint {
    TrainableState state;
    TrainerConfig cfg;
    int step = 0;
    std::map<std::string, Mat> adam_m, adam_v;
};
LoadedCheckpoint load_adapter_checkpoint(const std::string& path, const UnetSpec& unet);

}  // namespace aniadapter
