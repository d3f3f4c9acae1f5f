#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "aniadapter/dropout.hpp"
#include "aniadapter/error.hpp"
#include "aniadapter/stack.hpp"
#include "aniadapter/trainer.hpp"

using namespace aniadapter;

namespace {

std::vector<TrainingSample> toy_samples(const TrainerConfig& cfg, int n, uint64_t seed) {
    Rng rng(seed);
    int tokens = patch_token_count(cfg.encoder);
    std::vector<TrainingSample> out;
    for (int i = 0; i < n; ++i) {
        TrainingSample s;
        s.id = "toy" + std::to_string(i);
        s.image = Image(cfg.encoder.image_h, cfg.encoder.image_w);
        for (double& p : s.image.pix) p = rng.uniform();
        s.prompt = "long hair, smile, sample " + std::to_string(i);
        s.mask.m = Vec::Ones(tokens);
        s.skeleton = synthetic_pose(rng);
        out.push_back(std::move(s));
    }
    return out;
}

struct Harness {
    SurrogateStack stack;
    Trainer trainer;
    explicit Harness(const TrainerConfig& cfg)
        : stack(make_surrogate_stack(cfg)),
          trainer(cfg, *stack.vision, *stack.text, *stack.denoiser, *stack.controller,
                  stack.schedule) {}
};

TrainerConfig fast_cfg() {
    TrainerConfig cfg;
    cfg.batch_size = 4;
    return cfg;
}

bool state_equal(const TrainableState& a, const TrainableState& b) {
    if (hash_matrix(a.agg.alphas) != hash_matrix(b.agg.alphas)) return false;
    if (a.agg.proj.size() != b.agg.proj.size()) return false;
    for (size_t i = 0; i < a.agg.proj.size(); ++i)
        if (hash_matrix(a.agg.proj[i]) != hash_matrix(b.agg.proj[i])) return false;
    if (hash_matrix(a.agg.ln_gamma) != hash_matrix(b.agg.ln_gamma)) return false;
    if (hash_matrix(a.agg.ln_beta) != hash_matrix(b.agg.ln_beta)) return false;
    if (a.sites.sites().size() != b.sites.sites().size()) return false;
    for (size_t i = 0; i < a.sites.sites().size(); ++i) {
        if (hash_matrix(a.sites.sites()[i].Wk) != hash_matrix(b.sites.sites()[i].Wk)) return false;
        if (hash_matrix(a.sites.sites()[i].Wv) != hash_matrix(b.sites.sites()[i].Wv)) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("dropout thresholds") {
    for (DropoutMode mode : {DropoutMode::reinterpreted, DropoutMode::literal}) {
        CHECK(sample_dropout(0.10, mode).drop_image);
        CHECK_FALSE(sample_dropout(0.10, mode).drop_text);
        CHECK_FALSE(sample_dropout(0.17, mode).drop_image);
        CHECK(sample_dropout(0.17, mode).drop_text);
        CHECK(sample_dropout(0.22, mode).drop_image);
        CHECK(sample_dropout(0.22, mode).drop_text);
        // boundaries are half-open
        CHECK(sample_dropout(0.15, mode).drop_text);
        CHECK_FALSE(sample_dropout(0.15, mode).drop_image);
        CHECK(sample_dropout(0.2, mode).drop_image);
    }
    DropoutDecision keep = sample_dropout(0.25, DropoutMode::reinterpreted);
    CHECK_FALSE(keep.drop_image);
    CHECK_FALSE(keep.drop_text);
    CHECK_THROWS_AS(sample_dropout(0.25, DropoutMode::literal), DataError);
    CHECK_THROWS_AS(sample_dropout(-0.1, DropoutMode::reinterpreted), DataError);
    CHECK_THROWS_AS(sample_dropout(1.0, DropoutMode::reinterpreted), DataError);
}

TEST_CASE("dropout draw statistics") {
    const int n = 100000;

    Rng rng(123);
    int img = 0, txt = 0, both = 0, none = 0;
    for (int i = 0; i < n; ++i) {
        DropoutDecision d = sample_dropout(rng, DropoutMode::reinterpreted);
        if (d.drop_image && d.drop_text)
            ++both;
        else if (d.drop_image)
            ++img;
        else if (d.drop_text)
            ++txt;
        else
            ++none;
    }
    // binomial 3-sigma bounds at n=1e5
    CHECK(std::abs(img / double(n) - 0.15) < 0.005);
    CHECK(std::abs(txt / double(n) - 0.05) < 0.0035);
    CHECK(std::abs(both / double(n) - 0.05) < 0.0035);
    CHECK(std::abs(none / double(n) - 0.75) < 0.006);

    Rng rng2(321);
    img = txt = both = none = 0;
    for (int i = 0; i < n; ++i) {
        DropoutDecision d = sample_dropout(rng2, DropoutMode::literal);
        CHECK(d.c < 0.25);
        if (d.drop_image && d.drop_text)
            ++both;
        else if (d.drop_image)
            ++img;
        else if (d.drop_text)
            ++txt;
        else
            ++none;
    }
    CHECK(std::abs(img / double(n) - 0.60) < 0.005);
    CHECK(std::abs(txt / double(n) - 0.20) < 0.004);
    CHECK(std::abs(both / double(n) - 0.20) < 0.004);
    CHECK(none == 0);  // literal mode always drops something
}

TEST_CASE("train step is bitwise deterministic") {
    TrainerConfig cfg = fast_cfg();
    auto samples = toy_samples(cfg, 3, 1);
    Harness a(cfg), b(cfg);
    double la = a.trainer.train_step(samples);
    double lb = b.trainer.train_step(samples);
    CHECK(la == lb);
    CHECK(state_equal(a.trainer.state(), b.trainer.state()));
    CHECK(std::isfinite(la));
    CHECK(la > 0.0);
}

TEST_CASE("dead path: controller off and gamma zero give zero gradients") {
    TrainerConfig cfg = fast_cfg();
    cfg.controller = ControllerKind::none;
    cfg.gamma = 0.0;
    Harness h(cfg);
    auto samples = toy_samples(cfg, 3, 2);
    double loss = 0;
    AdapterGrads g = h.trainer.compute_batch_gradients(samples, &loss);
    CHECK(loss > 0.0);
    CHECK(g.dalphas.cwiseAbs().maxCoeff() == 0.0);
    for (const Mat& dp : g.dproj) CHECK(dp.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.dln_gamma.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.dln_beta.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& [id, dwkv] : g.dsites) {
        CHECK(dwkv.first.cwiseAbs().maxCoeff() == 0.0);
        CHECK(dwkv.second.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("live path gradients are nonzero") {
    TrainerConfig cfg = fast_cfg();
    Harness h(cfg);
    auto samples = toy_samples(cfg, 3, 3);
    AdapterGrads g = h.trainer.compute_batch_gradients(samples);
    double total = g.dalphas.cwiseAbs().sum() + g.dln_gamma.cwiseAbs().sum();
    for (const Mat& dp : g.dproj) total += dp.cwiseAbs().sum();
    for (const auto& [id, dwkv] : g.dsites)
        total += dwkv.first.cwiseAbs().sum() + dwkv.second.cwiseAbs().sum();
    CHECK(total > 0.0);
    CHECK(g.dsites.size() == 5);  // full_blocks scope
}

TEST_CASE("freeze audit") {
    TrainerConfig cfg = fast_cfg();
    Harness h(cfg);
    auto samples = toy_samples(cfg, 4, 4);

    CHECK(h.trainer.freeze_audit().ok);  // vacuous before any step

    h.trainer.run(samples, 10);
    FreezeReport after = h.trainer.freeze_audit();
    CHECK(after.ok);
    CHECK(after.mutated.empty());

    // a deliberately unfrozen controller must be caught
    h.stack.controller->mutable_weight("input")(0, 0) += 1.0;
    FreezeReport bad = h.trainer.freeze_audit();
    CHECK_FALSE(bad.ok);
    REQUIRE_FALSE(bad.mutated.empty());
    bool named = false;
    for (const auto& name : bad.mutated) named |= name.find("controller") != std::string::npos;
    CHECK(named);
}

TEST_CASE("pose condition reaches the controller every sample") {
    TrainerConfig cfg = fast_cfg();
    Harness h(cfg);
    auto samples = toy_samples(cfg, 3, 5);
    h.trainer.run(samples, 5);
    CHECK(h.trainer.controller_feed_count() == 5 * cfg.batch_size);

    TrainerConfig off = cfg;
    off.controller = ControllerKind::none;
    Harness h2(off);
    h2.trainer.run(samples, 5);
    CHECK(h2.trainer.controller_feed_count() == 0);
}

TEST_CASE("trainer config round-trips through the key-value form") {
    TrainerConfig cfg;
    cfg.steps = 123;
    cfg.batch_size = 5;
    cfg.lr = 3e-4;
    cfg.dropout_mode = DropoutMode::literal;
    cfg.controller = ControllerKind::controlnet;
    cfg.scope = InjectScope::up_blocks;
    cfg.gamma = 0.5;
    cfg.neg_bias = 77.0;
    cfg.seed = 99;
    cfg.encoder.patch = 14;
    cfg.encoder.image_h = cfg.encoder.image_w = 28;
    cfg.schedule_kind = "linear";
    cfg.schedule_T = 23;
    TrainerConfig back = TrainerConfig::from_config(cfg.to_config());
    CHECK(back.steps == cfg.steps);
    CHECK(back.batch_size == cfg.batch_size);
    CHECK(back.lr == cfg.lr);
    CHECK(back.dropout_mode == cfg.dropout_mode);
    CHECK(back.controller == cfg.controller);
    CHECK(back.scope == cfg.scope);
    CHECK(back.gamma == cfg.gamma);
    CHECK(back.neg_bias == cfg.neg_bias);
    CHECK(back.seed == cfg.seed);
    CHECK(back.encoder == cfg.encoder);
    CHECK(back.schedule_kind == cfg.schedule_kind);
    CHECK(back.schedule_T == cfg.schedule_T);
}

TEST_CASE("checkpoint round-trip preserves state and config") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "aniadapter_trainer_ckpt";
    fs::create_directories(dir);
    std::string path = (dir / "adapter.ckpt").string();

    TrainerConfig cfg = fast_cfg();
    cfg.scope = InjectScope::up_blocks;
    Harness h(cfg);
    auto samples = toy_samples(cfg, 4, 6);
    h.trainer.run(samples, 7);
    h.trainer.save_checkpoint(path);

    LoadedCheckpoint lc = load_adapter_checkpoint(path, UnetSpec::surrogate_default());
    CHECK(lc.step == 7);
    CHECK(lc.cfg.scope == InjectScope::up_blocks);
    CHECK(lc.cfg.seed == cfg.seed);
    CHECK(state_equal(lc.state, h.trainer.state()));
    CHECK(lc.state.sites.sites().size() == 2);  // up_blocks only
    CHECK_FALSE(lc.adam_m.empty());
    CHECK_FALSE(lc.adam_v.empty());

    // resuming restores the optimizer step counter
    Harness fresh(cfg);
    fresh.trainer.load_checkpoint(path);
    CHECK(fresh.trainer.step_count() == 7);
    CHECK(state_equal(fresh.trainer.state(), h.trainer.state()));

    fs::remove_all(dir);
}

TEST_CASE("training loss trends down on a tiny overfit run") {
    TrainerConfig cfg = fast_cfg();
    Harness h(cfg);
    auto samples = toy_samples(cfg, 4, 7);
    std::vector<double> losses = h.trainer.run(samples, 60);
    REQUIRE(losses.size() == 60);
    double head = std::accumulate(losses.begin(), losses.begin() + 5, 0.0) / 5.0;
    double tail = std::accumulate(losses.end() - 5, losses.end(), 0.0) / 5.0;
    CHECK(tail < head);
    CHECK(h.trainer.freeze_audit().ok);
}

TEST_CASE("spec mismatch between config and vision backend is rejected") {
    TrainerConfig cfg = fast_cfg();
    SurrogateStack stack = make_surrogate_stack(cfg);
    TrainerConfig other = cfg;
    other.encoder.patch = 14;  // backend was built for patch 7
    CHECK_THROWS_AS(Trainer(other, *stack.vision, *stack.text, *stack.denoiser, *stack.controller,
                            stack.schedule),
                    DataError);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    // a text backend emitting astronomically large embeddings drives the
    // surrogate loss to infinity; the trainer must fail loudly, naming the
    // sample (the aggregator's row normalization shields the vision path, so
    // the text branch is the reliable way in)
    class HugeText : public TextBackend {
    public:
        int dim() const override { return 16; }
        Mat encode(const std::string&) override { return Mat::Constant(2, 16, 1e200); }
    };

    TrainerConfig cfg = fast_cfg();
    SurrogateStack stack = make_surrogate_stack(cfg);
    HugeText text;
    Trainer t(cfg, *stack.vision, text, *stack.denoiser, *stack.controller, stack.schedule);
    auto samples = toy_samples(cfg, 2, 8);
    try {
        t.train_step(samples);
        FAIL("expected a backend error for the non-finite loss");
    } catch (const BackendError& e) {
        CHECK(std::string(e.what()).find("toy") != std::string::npos);
    }
}
