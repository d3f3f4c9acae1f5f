#include "aniadapter/trainer.hpp"

#include <cmath>
#include <sstream>

#include "aniadapter/checkpoint.hpp"
#include "aniadapter/diffusion.hpp"
#include "aniadapter/error.hpp"

namespace aniadapter {

TrainerConfig TrainerConfig::from_config(const Config& cfg) {
    TrainerConfig t;
    t.steps = int(cfg.get_int("steps", t.steps));
    t.batch_size = int(cfg.get_int("batch_size", t.batch_size));
    t.lr = cfg.get_double("lr", t.lr);
    t.weight_decay = cfg.get_double("weight_decay", t.weight_decay);
    t.beta1 = cfg.get_double("beta1", t.beta1);
    t.beta2 = cfg.get_double("beta2", t.beta2);
    t.adam_eps = cfg.get_double("adam_eps", t.adam_eps);
    t.dropout_mode = dropout_mode_from_name(
        cfg.get_str("dropout_mode", dropout_mode_name(t.dropout_mode)));
    t.controller =
        controller_kind_from_name(cfg.get_str("controller", controller_kind_name(t.controller)));
    t.scope = inject_scope_from_name(cfg.get_str("scope", inject_scope_name(t.scope)));
    t.gamma = cfg.get_double("gamma", t.gamma);
    t.neg_bias = cfg.get_double("neg_bias", t.neg_bias);
    t.seed = uint64_t(cfg.get_int("seed", int64_t(t.seed)));
    t.checkpoint_every = int(cfg.get_int("checkpoint_every", t.checkpoint_every));
    t.encoder.image_h = int(cfg.get_int("encoder.image_h", t.encoder.image_h));
    t.encoder.image_w = int(cfg.get_int("encoder.image_w", t.encoder.image_w));
    t.encoder.patch = int(cfg.get_int("encoder.patch", t.encoder.patch));
    t.encoder.hidden_dim = int(cfg.get_int("encoder.hidden_dim", t.encoder.hidden_dim));
    t.encoder.layers = int(cfg.get_int("encoder.layers", t.encoder.layers));
    t.encoder.k = int(cfg.get_int("encoder.k", t.encoder.k));
    t.encoder.target_dim = int(cfg.get_int("encoder.target_dim", t.encoder.target_dim));
    t.latent_h = int(cfg.get_int("latent_h", t.latent_h));
    t.latent_w = int(cfg.get_int("latent_w", t.latent_w));
    t.schedule_kind = cfg.get_str("schedule", t.schedule_kind);
    t.schedule_T = int(cfg.get_int("schedule_T", t.schedule_T));
    return t;
}

Config TrainerConfig::to_config() const {
    Config c;
    c.set("steps", int64_t(steps));
    c.set("batch_size", int64_t(batch_size));
    c.set("lr", lr);
    c.set("weight_decay", weight_decay);
    c.set("beta1", beta1);
    c.set("beta2", beta2);
    c.set("adam_eps", adam_eps);
    c.set("dropout_mode", dropout_mode_name(dropout_mode));
    c.set("controller", controller_kind_name(controller));
    c.set("scope", inject_scope_name(scope));
    c.set("gamma", gamma);
    c.set("neg_bias", neg_bias);
    c.set("seed", int64_t(seed));
    c.set("checkpoint_every", int64_t(checkpoint_every));
    c.set("encoder.image_h", int64_t(encoder.image_h));
    c.set("encoder.image_w", int64_t(encoder.image_w));
    c.set("encoder.patch", int64_t(encoder.patch));
    c.set("encoder.hidden_dim", int64_t(encoder.hidden_dim));
    c.set("encoder.layers", int64_t(encoder.layers));
    c.set("encoder.k", int64_t(encoder.k));
    c.set("encoder.target_dim", int64_t(encoder.target_dim));
    c.set("latent_h", int64_t(latent_h));
    c.set("latent_w", int64_t(latent_w));
    c.set("schedule", schedule_kind);
    c.set("schedule_T", int64_t(schedule_T));
    return c;
}

Trainer::Trainer(TrainerConfig cfg, VisionBackend& vision, TextBackend& text,
                 SurrogateDenoiser& denoiser, PoseController& controller,
                 const NoiseSchedule& schedule)
    : cfg_(cfg),
      vision_(vision),
      text_(text),
      denoiser_(denoiser),
      controller_(controller),
      schedule_(schedule),
      rng_(Rng(cfg.seed).fork("trainer")) {
    if (cfg_.batch_size < 1) throw DataError("batch_size must be >= 1");
    if (cfg_.encoder != vision_.spec())
        throw DataError("trainer encoder spec does not match vision backend");
    Rng agg_rng = Rng(cfg_.seed).fork("aggregator");
    state_.agg = AggregatorParams::init(cfg_.encoder, agg_rng);
    Rng site_rng = Rng(cfg_.seed).fork("sites");
    state_.sites.attach(denoiser_.unet(), cfg_.scope, cfg_.encoder.target_dim, site_rng);
    frozen_baseline_ = hash_frozen();
}

std::map<std::string, uint64_t> Trainer::hash_frozen() const {
    std::map<std::string, uint64_t> out;
    denoiser_.hash_parameters(out, "denoiser");
    vision_.hash_parameters(out, "vision");
    controller_.hash_parameters(out, "controller");
    return out;
}

FreezeReport Trainer::freeze_audit() const {
    FreezeReport report;
    std::map<std::string, uint64_t> now = hash_frozen();
    for (const auto& [name, h] : frozen_baseline_) {
        auto it = now.find(name);
        if (it == now.end() || it->second != h) report.mutated.push_back(name);
    }
    for (const auto& [name, h] : now)
        if (!frozen_baseline_.count(name)) report.mutated.push_back(name);
    report.ok = report.mutated.empty();
    return report;
}

AdapterGrads Trainer::zero_grads() const {
    AdapterGrads g;
    g.dalphas = Vec::Zero(state_.agg.alphas.size());
    for (const Mat& w : state_.agg.proj) g.dproj.push_back(Mat::Zero(w.rows(), w.cols()));
    g.dln_gamma = Vec::Zero(state_.agg.ln_gamma.size());
    g.dln_beta = Vec::Zero(state_.agg.ln_beta.size());
    for (const auto& s : state_.sites.sites())
        g.dsites[s.info.id] = {Mat::Zero(s.Wk.rows(), s.Wk.cols()),
                              Mat::Zero(s.Wv.rows(), s.Wv.cols())};
    return g;
}

void Trainer::accumulate_sample(const TrainingSample& sample, AdapterGrads& grads,
                                double& loss_acc) {
    auto cached = stack_cache_.find(sample.id);
    if (cached == stack_cache_.end())
        cached = stack_cache_.emplace(sample.id, vision_.encode(sample.image, sample.id)).first;
    const LayerStack& stack = cached->second;

    AggregateCache agg_cache;
    Mat tokens = aggregate(stack, state_.agg, &agg_cache);

    DropoutDecision drop = sample_dropout(rng_, cfg_.dropout_mode);

    MaskedReference mr;
    mr.ref.source_id = sample.id;
    mr.ref.tokens = drop.drop_image ? Mat(Mat::Zero(tokens.rows(), tokens.cols())) : tokens;
    mr.mask = sample.mask;
    std::vector<MaskedReference> refs{mr};

    Mat text_tokens = text_.encode(drop.drop_text ? "" : sample.prompt);

    int t = int(1 + rng_.uniform_index(uint64_t(schedule_.T())));
    Mat x0 = sample.image.to_matrix();
    Mat eps = random_normal_like(x0, rng_);
    Mat x_t = forward_diffuse(x0, t, eps, schedule_);

    std::map<std::string, Vec> residuals = controller_.residuals(sample.skeleton);
    if (controller_.kind() != ControllerKind::none) ++controller_feeds_;

    InjectionConfig icfg;
    icfg.gamma = cfg_.gamma;
    icfg.neg_bias = cfg_.neg_bias;
    icfg.mode = MaskMode::train_bias;
    icfg.scope = cfg_.scope;

    DenoiserCache dcache;
    Mat eps_hat = denoiser_.predict_eps(x_t, t, schedule_, text_tokens, refs, state_.sites, icfg,
                                        residuals, &dcache);
    double loss = training_loss(eps, eps_hat);
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss: sample=" << sample.id << " step=" << step_
            << " t=" << t << " loss=" << loss;
        throw BackendError(msg.str());
    }
    loss_acc += loss;

    Mat d_eps_hat = (2.0 / double(eps_hat.size())) * (eps_hat - eps);
    DenoiserGrads dg = denoiser_.backward(dcache, state_.sites, icfg, d_eps_hat);

    for (const auto& [id, dwkv] : dg.dsites) {
        auto& acc = grads.dsites.at(id);
        acc.first += dwkv.first;
        acc.second += dwkv.second;
    }
    if (!drop.drop_image && !dg.dI.empty()) {
        AggregateGrads ag = aggregate_backward(agg_cache, state_.agg, dg.dI[0]);
        grads.dalphas += ag.dalphas;
        for (size_t i = 0; i < ag.dproj.size(); ++i) grads.dproj[i] += ag.dproj[i];
        grads.dln_gamma += ag.dln_gamma;
        grads.dln_beta += ag.dln_beta;
    }
}

AdapterGrads Trainer::compute_batch_gradients(const std::vector<TrainingSample>& samples,
                                              double* mean_loss) {
    if (samples.empty()) throw DataError("training set is empty");
    AdapterGrads grads = zero_grads();
    double loss_acc = 0.0;
    for (int b = 0; b < cfg_.batch_size; ++b) {
        const TrainingSample& sample = samples[cursor_ % samples.size()];
        ++cursor_;
        accumulate_sample(sample, grads, loss_acc);
    }
    double inv = 1.0 / double(cfg_.batch_size);
    grads.dalphas *= inv;
    for (Mat& m : grads.dproj) m *= inv;
    grads.dln_gamma *= inv;
    grads.dln_beta *= inv;
    for (auto& [id, dwkv] : grads.dsites) {
        dwkv.first *= inv;
        dwkv.second *= inv;
    }
    if (mean_loss) *mean_loss = loss_acc * inv;
    return grads;
}

void Trainer::adam_update(const std::string& name, Eigen::Ref<Mat> param, const Mat& grad,
                          bool decay) {
    Mat& m = adam_m_.try_emplace(name, Mat::Zero(param.rows(), param.cols())).first->second;
    Mat& v = adam_v_.try_emplace(name, Mat::Zero(param.rows(), param.cols())).first->second;
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    double bc1 = 1.0 - std::pow(cfg_.beta1, adam_t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, adam_t_);
    Mat update =
        ((m / bc1).array() / ((v / bc2).array().sqrt() + cfg_.adam_eps)).matrix();
    if (decay) update += cfg_.weight_decay * param;
    param -= cfg_.lr * update;
}

void Trainer::apply_update(const AdapterGrads& grads) {
    ++adam_t_;
    // Weight decay on projection matrices only; gains, biases and the layer
    // weights stay undecayed.
    adam_update("agg.alphas", state_.agg.alphas, grads.dalphas, false);
    for (size_t i = 0; i < state_.agg.proj.size(); ++i)
        adam_update("agg.proj." + std::to_string(i), state_.agg.proj[i], grads.dproj[i], true);
    adam_update("agg.ln_gamma", state_.agg.ln_gamma, grads.dln_gamma, false);
    adam_update("agg.ln_beta", state_.agg.ln_beta, grads.dln_beta, false);
    for (auto& s : state_.sites.sites()) {
        const auto& dwkv = grads.dsites.at(s.info.id);
        adam_update("site." + s.info.id + ".wk", s.Wk, dwkv.first, true);
        adam_update("site." + s.info.id + ".wv", s.Wv, dwkv.second, true);
    }
}

double Trainer::train_step(const std::vector<TrainingSample>& samples) {
    double mean_loss = 0.0;
    AdapterGrads grads = compute_batch_gradients(samples, &mean_loss);
    apply_update(grads);
    ++step_;
    return mean_loss;
}

std::vector<double> Trainer::run(const std::vector<TrainingSample>& samples, int steps) {
    std::vector<double> losses;
    losses.reserve(size_t(steps));
    for (int i = 0; i < steps; ++i) losses.push_back(train_step(samples));
    return losses;
}

void Trainer::save_checkpoint(const std::string& path) const {
    save_adapter_checkpoint(path, state_, cfg_, step_, adam_m_, adam_v_);
}

void Trainer::load_checkpoint(const std::string& path) {
    LoadedCheckpoint lc = load_adapter_checkpoint(path, denoiser_.unet());
    if (lc.cfg.encoder != cfg_.encoder)
        throw DataError("checkpoint encoder spec does not match trainer");
    state_ = std::move(lc.state);
    step_ = lc.step;
    adam_t_ = lc.step;
    adam_m_ = std::move(lc.adam_m);
    adam_v_ = std::move(lc.adam_v);
}

namespace {

Mat vec_as_mat(const Vec& v) { return Mat(v); }

}  // namespace

void save_adapter_checkpoint(const std::string& path, const TrainableState& state,
                             const TrainerConfig& cfg, int step,
                             const std::map<std::string, Mat>& adam_m,
                             const std::map<std::string, Mat>& adam_v) {
    TensorArchive ar;
    ar.set_meta("version", "1");
    ar.set_meta("scope", inject_scope_name(cfg.scope));
    ar.set_meta("k", std::to_string(cfg.encoder.k));
    ar.set_meta("dprime", std::to_string(cfg.encoder.target_dim));
    ar.set_meta("step", std::to_string(step));
    ar.set_meta("controller", controller_kind_name(cfg.controller));
    ar.set_meta("dropout_mode", dropout_mode_name(cfg.dropout_mode));
    Config cfg_table = cfg.to_config();
    for (const auto& [key, value] : cfg_table.entries())
        ar.set_meta("config." + key, value);
    ar.add("agg.alphas", vec_as_mat(state.agg.alphas));
    for (size_t i = 0; i < state.agg.proj.size(); ++i)
        ar.add("agg.proj." + std::to_string(i), state.agg.proj[i]);
    ar.add("agg.ln_gamma", vec_as_mat(state.agg.ln_gamma));
    ar.add("agg.ln_beta", vec_as_mat(state.agg.ln_beta));
    state.sites.save_into(ar);
    for (const auto& [name, m] : adam_m) ar.add("adam.m." + name, m);
    for (const auto& [name, m] : adam_v) ar.add("adam.v." + name, m);
    ar.save(path);
}

LoadedCheckpoint load_adapter_checkpoint(const std::string& path, const UnetSpec& unet) {
    TensorArchive ar = TensorArchive::load(path);
    LoadedCheckpoint lc;
    Config cfg_table;
    for (const auto& [key, value] : ar.all_meta())
        if (key.rfind("config.", 0) == 0) cfg_table.set(key.substr(7), value);
    lc.cfg = TrainerConfig::from_config(cfg_table);
    lc.cfg.scope = inject_scope_from_name(ar.meta("scope", inject_scope_name(lc.cfg.scope)));
    lc.step = int(std::stol(ar.meta("step", "0")));

    int k = int(std::stol(ar.meta("k", std::to_string(lc.cfg.encoder.k))));
    lc.state.agg.alphas = ar.get("agg.alphas").col(0);
    for (int i = 0; i < k; ++i) lc.state.agg.proj.push_back(ar.get("agg.proj." + std::to_string(i)));
    lc.state.agg.ln_gamma = ar.get("agg.ln_gamma").col(0);
    lc.state.agg.ln_beta = ar.get("agg.ln_beta").col(0);
    lc.state.sites = InjectionSites::load_from(ar, unet);
    for (const std::string& name : ar.names()) {
        if (name.rfind("adam.m.", 0) == 0) lc.adam_m[name.substr(7)] = ar.get(name);
        if (name.rfind("adam.v.", 0) == 0) lc.adam_v[name.substr(7)] = ar.get(name);
    }
    if (int(lc.state.agg.proj.size()) != k) throw DataError("checkpoint layer count mismatch");
    return lc;
}

}  // namespace aniadapter
