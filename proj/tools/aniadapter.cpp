#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aniadapter/dataset.hpp"
#include "aniadapter/error.hpp"
#include "aniadapter/eval_runner.hpp"
#include "aniadapter/generate.hpp"
#include "aniadapter/stack.hpp"

namespace fs = std::filesystem;
using namespace aniadapter;

namespace {

void write_run_config(const std::string& out_dir, Config cfg, const std::string& subcommand) {
    fs::create_directories(out_dir);
    cfg.set("subcommand", subcommand);
    cfg.save(out_dir + "/run.config");
}

std::vector<std::string> parse_task_list(const std::string& tasks) {
    std::vector<std::string> out;
    if (tasks.empty() || tasks == "all") return out;
    std::string cur;
    for (char c : tasks + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    for (const std::string& name : out) edit_task_from_name(name);
    return out;
}

// Evaluation-side adapter around the sampler.
class PipelineCaseGenerator : public CaseGenerator {
public:
    PipelineCaseGenerator(InferencePipeline& pipeline, double guidance, bool use_mask)
        : pipeline_(pipeline), guidance_(guidance), use_mask_(use_mask) {}

    std::vector<Image> generate(const ManifestEntry& entry, const EditPrompt& edit,
                                const Image& reference, const PixelMask& mask,
                                const PoseSkeleton* pose, int n, uint64_t seed) override {
        GenerationRequest req;
        req.reference = reference;
        req.reference_id = entry.id;
        if (use_mask_) req.reference_mask = mask;
        req.prompt = render_prompt(edit.tags);
        if (pose) req.pose = *pose;
        req.samples = n;
        req.seed = seed;
        req.guidance = guidance_;
        return pipeline_.generate(req).images;
    }

private:
    InferencePipeline& pipeline_;
    double guidance_;
    bool use_mask_;
};

// Returns the reference n times; the degenerate baseline for metric checks.
class IdentityCaseGenerator : public CaseGenerator {
public:
    std::vector<Image> generate(const ManifestEntry&, const EditPrompt&, const Image& reference,
                                const PixelMask&, const PoseSkeleton*, int n,
                                uint64_t) override {
        return std::vector<Image>(size_t(n), reference);
    }
};

int cmd_build_dataset(const std::string& metadata, const std::string& taxonomy,
                      const std::string& out, uint64_t seed, const std::string& tasks,
                      bool synthesize, int image_size, bool verbose) {
    DatasetBuildOptions options;
    options.metadata_path = metadata;
    options.taxonomy_path = taxonomy;
    options.out_dir = out;
    options.seed = seed;
    for (const std::string& name : parse_task_list(tasks))
        options.tasks.push_back(edit_task_from_name(name));
    options.synthesize = synthesize;
    options.image_size = image_size;
    if (verbose) options.log = [](const std::string& m) { std::cerr << m << "\n"; };

    Config cfg;
    cfg.set("metadata", metadata);
    cfg.set("taxonomy", taxonomy.empty() ? std::string("<builtin>") : taxonomy);
    cfg.set("seed", int64_t(seed));
    cfg.set("tasks", tasks.empty() ? std::string("all") : tasks);
    cfg.set("synthesize", synthesize ? "true" : "false");
    cfg.set("image_size", int64_t(image_size));
    write_run_config(out, cfg, "build-dataset");

    DatasetBuildReport report = build_dataset(options);
    std::cout << "metadata records: " << report.total << "\n"
              << "accepted: " << report.accepted << "\n";
    for (const auto& [reason, count] : report.rejected_by_reason)
        std::cout << "rejected (" << reason << "): " << count << "\n";
    std::cout << "manifest: " << report.manifest_path << "\n";
    return 0;
}

int cmd_train(const std::string& manifest, const std::string& config_path,
              const std::string& out, const std::string& controller, int steps_override,
              int64_t seed_override) {
    Config file_cfg;
    if (!config_path.empty()) file_cfg = Config::load(config_path);
    TrainerConfig cfg = TrainerConfig::from_config(file_cfg);
    if (!controller.empty()) cfg.controller = controller_kind_from_name(controller);
    if (steps_override > 0) cfg.steps = steps_override;
    if (seed_override >= 0) cfg.seed = uint64_t(seed_override);

    std::vector<ManifestEntry> entries = parse_manifest(manifest);
    std::string asset_root = fs::path(manifest).parent_path().string();
    std::vector<TrainingSample> samples = load_training_samples(entries, asset_root, cfg.encoder);
    if (samples.empty()) throw DataError("manifest contains no trainable samples");

    write_run_config(out, cfg.to_config(), "train");

    SurrogateStack stack = make_surrogate_stack(cfg);
    Trainer trainer(cfg, *stack.vision, *stack.text, *stack.denoiser, *stack.controller,
                    stack.schedule);

    std::ofstream loss_log(out + "/train_loss.txt");
    for (int step = 1; step <= cfg.steps; ++step) {
        double loss = trainer.train_step(samples);
        loss_log << step << " " << loss << "\n";
        if (step % 50 == 0 || step == cfg.steps)
            std::cout << "step " << step << " loss " << loss << "\n";
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.steps) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "step%06d.ckpt", step);
            trainer.save_checkpoint(out + "/" + buf);
        }
    }

    FreezeReport audit = trainer.freeze_audit();
    if (!audit.ok) {
        std::string names;
        for (const std::string& n : audit.mutated) names += " " + n;
        throw BackendError("freeze audit failed; mutated:" + names);
    }
    std::cout << "freeze audit: ok\n";

    trainer.save_checkpoint(out + "/adapter.ckpt");
    std::cout << "checkpoint: " << out << "/adapter.ckpt\n";
    return 0;
}

int cmd_generate(const std::string& checkpoint, const std::string& reference,
                 const std::string& mask, const std::string& prompt, const std::string& pose,
                 const std::vector<std::string>& extra_refs,
                 const std::vector<std::string>& extra_masks, int samples, double guidance,
                 uint64_t seed, const std::string& out, bool no_adapter, bool renormalize,
                 double gamma_override) {
    if (extra_masks.size() > extra_refs.size())
        throw UsageError("more --extra-mask values than --extra-ref values");

    LoadedCheckpoint ckpt = load_adapter_checkpoint(checkpoint, UnetSpec::surrogate_default());
    SurrogateStack stack = make_surrogate_stack(ckpt.cfg);

    InferencePipeline pipeline(std::move(ckpt), *stack.vision, *stack.text, *stack.denoiser,
                               *stack.controller, stack.schedule);
    pipeline.injection_config().renormalize = renormalize;
    if (gamma_override >= 0.0) pipeline.injection_config().gamma = gamma_override;

    GenerationRequest req;
    req.reference = read_pgm(reference);
    req.reference_id = fs::path(reference).stem().string();
    if (!mask.empty()) req.reference_mask = read_mask_png(mask);
    req.prompt = prompt;
    if (!pose.empty()) req.pose = PoseSkeleton::load(pose);
    for (size_t i = 0; i < extra_refs.size(); ++i) {
        GenerationRequest::ExtraRef extra;
        extra.image = read_pgm(extra_refs[i]);
        extra.id = fs::path(extra_refs[i]).stem().string();
        if (i < extra_masks.size()) extra.mask = read_mask_png(extra_masks[i]);
        req.extra_refs.push_back(std::move(extra));
    }
    req.samples = samples;
    req.guidance = guidance;
    req.seed = seed;
    req.use_adapter = !no_adapter;

    Config cfg = pipeline.checkpoint_config().to_config();
    cfg.set("checkpoint", checkpoint);
    cfg.set("reference", reference);
    cfg.set("prompt", prompt);
    cfg.set("samples", int64_t(samples));
    cfg.set("guidance", guidance);
    cfg.set("sample_seed", int64_t(seed));
    cfg.set("use_adapter", no_adapter ? "false" : "true");
    write_run_config(out, cfg, "generate");

    GenerationResult result = pipeline.generate(req);
    for (size_t i = 0; i < result.images.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "sample%02zu.pgm", i);
        write_pgm(result.images[i], out + "/" + buf);
    }
    std::cout << "wrote " << result.images.size() << " samples to " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& manifest, const std::string& task,
                 const std::string& generator, const std::string& checkpoint, double guidance,
                 uint64_t seed, const std::string& out) {
    std::vector<ManifestEntry> entries = parse_manifest(manifest);

    EvalOptions options;
    options.seed = seed;
    options.asset_root = fs::path(manifest).parent_path().string();
    options.log = [](const std::string& m) { std::cerr << m << "\n"; };

    SurrogateEmbedder embedder(32, 417);
    SurrogateLpips lpips;
    StickFigureDetector detector;

    Config cfg;
    cfg.set("manifest", manifest);
    cfg.set("task", task.empty() ? std::string("all") : task);
    cfg.set("generator", generator);
    cfg.set("seed", int64_t(seed));
    cfg.set("guidance", guidance);
    if (!checkpoint.empty()) cfg.set("checkpoint", checkpoint);
    write_run_config(out, cfg, "evaluate");

    MetricsReport report;
    std::vector<std::string> tasks = parse_task_list(task);
    if (generator == "identity") {
        IdentityCaseGenerator gen;
        report = run_eval(entries, tasks, gen, embedder, lpips, detector, options);
    } else if (generator == "pipeline") {
        if (checkpoint.empty()) throw UsageError("--generator pipeline needs --checkpoint");
        LoadedCheckpoint ckpt = load_adapter_checkpoint(checkpoint, UnetSpec::surrogate_default());
        SurrogateStack stack = make_surrogate_stack(ckpt.cfg);
        InferencePipeline pipeline(std::move(ckpt), *stack.vision, *stack.text, *stack.denoiser,
                                   *stack.controller, stack.schedule);
        PipelineCaseGenerator gen(pipeline, guidance, true);
        report = run_eval(entries, tasks, gen, embedder, lpips, detector, options);
    } else {
        throw UsageError("unknown generator backend: " + generator);
    }

    std::ofstream(out + "/report.txt") << report.to_text();
    std::ofstream(out + "/report.json") << report.to_json();
    std::ofstream(out + "/cases.jsonl") << report.rows_jsonl();
    std::cout << report.to_text();
    return 0;
}

int cmd_ablate(const std::string& manifest, const std::string& out, int steps, uint64_t seed,
               const std::string& grid) {
    std::vector<ManifestEntry> entries = parse_manifest(manifest);
    std::string asset_root = fs::path(manifest).parent_path().string();

    bool ax_scope = grid.find("scope") != std::string::npos;
    bool ax_mask = grid.find("mask") != std::string::npos;
    bool ax_controller = grid.find("controller") != std::string::npos;
    if (!ax_scope && !ax_mask && !ax_controller)
        throw UsageError("--grid must name at least one of scope, mask, controller");

    std::vector<InjectScope> scopes =
        ax_scope ? std::vector<InjectScope>{InjectScope::full_blocks, InjectScope::up_blocks}
                 : std::vector<InjectScope>{InjectScope::full_blocks};
    std::vector<bool> masks = ax_mask ? std::vector<bool>{true, false}
                                      : std::vector<bool>{true};
    std::vector<ControllerKind> controllers =
        ax_controller ? std::vector<ControllerKind>{ControllerKind::t2i_adapter,
                                                    ControllerKind::controlnet,
                                                    ControllerKind::none}
                      : std::vector<ControllerKind>{ControllerKind::t2i_adapter};

    Config run_cfg;
    run_cfg.set("manifest", manifest);
    run_cfg.set("steps", int64_t(steps));
    run_cfg.set("seed", int64_t(seed));
    run_cfg.set("grid", grid);
    write_run_config(out, run_cfg, "ablate");

    SurrogateEmbedder embedder(32, 417);
    SurrogateLpips lpips;
    StickFigureDetector detector;

    std::ostringstream table;
    table << "combo final_loss clip_t clip_i_masked lpips psnr\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();

    for (InjectScope scope : scopes)
        for (bool use_mask : masks)
            for (ControllerKind controller : controllers) {
                TrainerConfig cfg;
                cfg.steps = steps;
                cfg.seed = seed;
                cfg.scope = scope;
                cfg.controller = controller;
                std::string combo = std::string(inject_scope_name(scope)) + "/" +
                                    (use_mask ? "mask" : "nomask") + "/" +
                                    controller_kind_name(controller);

                std::vector<TrainingSample> samples =
                    load_training_samples(entries, asset_root, cfg.encoder);
                if (samples.empty()) throw DataError("manifest contains no trainable samples");
                if (!use_mask)
                    for (TrainingSample& s : samples) {
                        s.mask.m.setOnes();
                        s.mask.origin = "ablation-all-foreground";
                    }

                SurrogateStack stack = make_surrogate_stack(cfg);
                Trainer trainer(cfg, *stack.vision, *stack.text, *stack.denoiser,
                                *stack.controller, stack.schedule);
                double final_loss = 0.0;
                for (int i = 0; i < steps; ++i) final_loss = trainer.train_step(samples);

                std::string ckpt_path = out + "/" + "ablate_" +
                                        std::to_string(rows.size()) + ".ckpt";
                trainer.save_checkpoint(ckpt_path);
                LoadedCheckpoint ckpt =
                    load_adapter_checkpoint(ckpt_path, UnetSpec::surrogate_default());
                SurrogateStack eval_stack = make_surrogate_stack(ckpt.cfg);
                InferencePipeline pipeline(std::move(ckpt), *eval_stack.vision,
                                           *eval_stack.text, *eval_stack.denoiser,
                                           *eval_stack.controller, eval_stack.schedule);
                PipelineCaseGenerator gen(pipeline, 1.0, use_mask);

                EvalOptions eval_options;
                eval_options.seed = seed;
                eval_options.asset_root = asset_root;
                MetricsReport report = run_eval(entries, {"body_motion"}, gen, embedder, lpips,
                                                detector, eval_options);
                const TaskSummary* summary = report.task("body_motion");

                auto metric = [&](const char* name) {
                    const double* v = summary ? summary->metric(name) : nullptr;
                    return v ? *v : std::numeric_limits<double>::quiet_NaN();
                };
                table << combo << " " << final_loss << " " << metric("clip_t") << " "
                      << metric("clip_i_masked") << " " << metric("lpips") << " "
                      << metric("psnr") << "\n";
                nlohmann::ordered_json row;
                row["combo"] = combo;
                row["scope"] = inject_scope_name(scope);
                row["mask"] = use_mask;
                row["controller"] = controller_kind_name(controller);
                row["final_loss"] = final_loss;
                row["clip_t"] = metric("clip_t");
                row["clip_i_masked"] = metric("clip_i_masked");
                row["lpips"] = metric("lpips");
                row["psnr"] = metric("psnr");
                rows.push_back(row);
                std::cout << combo << " done (loss " << final_loss << ")\n";
            }

    std::ofstream(out + "/ablation.txt") << table.str();
    std::ofstream(out + "/ablation.json") << rows.dump(2);
    std::cout << table.str();
    return 0;
}

int cmd_inspect(const std::string& path) {
    TensorArchive ar = TensorArchive::load(path);
    std::cout << "archive ok: " << ar.names().size() << " tensors, payload verified\n";
    std::cout << "version " << ar.meta("version", "?") << "  step " << ar.meta("step", "?")
              << "  scope " << ar.meta("scope", "?") << "  k " << ar.meta("k", "?")
              << "  dprime " << ar.meta("dprime", "?") << "  controller "
              << ar.meta("controller", "?") << "  dropout " << ar.meta("dropout_mode", "?")
              << "\n";
    std::string sites;
    for (const std::string& name : ar.names()) {
        if (name.rfind("site.", 0) == 0 && name.size() > 3 &&
            name.compare(name.size() - 3, 3, ".wk") == 0)
            sites += " " + name.substr(5, name.size() - 8);
    }
    std::cout << "sites:" << sites << "\n";
    for (const std::string& name : ar.names()) {
        const Mat& t = ar.get(name);
        std::cout << "tensor " << name << " " << t.rows() << "x" << t.cols() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Appearance-adapter toolkit: dataset construction, adapter training, masked "
                 "reference-guided sampling, and evaluation on deterministic surrogate backends"};
    app.require_subcommand(1);

    // build-dataset
    auto* bd = app.add_subcommand("build-dataset", "Filter metadata, build prompts, emit manifest");
    std::string bd_metadata, bd_taxonomy, bd_out, bd_tasks = "all";
    uint64_t bd_seed = 0;
    bool bd_synthesize = true, bd_verbose = false;
    int bd_image_size = 28;
    bd->add_option("--metadata", bd_metadata, "Metadata JSONL path")->required();
    bd->add_option("--taxonomy", bd_taxonomy, "Taxonomy TSV (default: built-in table)");
    bd->add_option("--out", bd_out, "Output directory")->required();
    bd->add_option("--seed", bd_seed, "Build seed");
    bd->add_option("--tasks", bd_tasks, "all or comma-separated edit-task names");
    bd->add_flag("!--no-synthesize", bd_synthesize, "Skip toy asset synthesis");
    bd->add_option("--image-size", bd_image_size, "Synthesized image edge length");
    bd->add_flag("--verbose", bd_verbose, "Log per-entry decisions");

    // train
    auto* tr = app.add_subcommand("train", "Train the adapter on a manifest");
    std::string tr_manifest, tr_config, tr_out, tr_controller;
    int tr_steps = 0;
    int64_t tr_seed = -1;
    tr->add_option("--manifest", tr_manifest, "Dataset manifest")->required();
    tr->add_option("--config", tr_config, "Trainer config file");
    tr->add_option("--out", tr_out, "Output directory")->required();
    tr->add_option("--controller", tr_controller, "t2i|controlnet|none");
    tr->add_option("--steps", tr_steps, "Override step count");
    tr->add_option("--seed", tr_seed, "Override seed");

    // generate
    auto* ge = app.add_subcommand("generate", "Sample images from a trained checkpoint");
    std::string ge_checkpoint, ge_reference, ge_mask, ge_prompt, ge_pose, ge_out;
    std::vector<std::string> ge_extra_refs, ge_extra_masks;
    int ge_samples = 1;
    double ge_guidance = 1.0, ge_gamma = -1.0;
    uint64_t ge_seed = 0;
    bool ge_no_adapter = false, ge_renormalize = false;
    ge->add_option("--checkpoint", ge_checkpoint, "Adapter checkpoint")->required();
    ge->add_option("--reference", ge_reference, "Reference image (PGM)")->required();
    ge->add_option("--mask", ge_mask, "Reference mask (1-bit PNG)");
    ge->add_option("--prompt", ge_prompt, "Text prompt")->required();
    ge->add_option("--pose", ge_pose, "Pose skeleton file");
    ge->add_option("--extra-ref", ge_extra_refs, "Additional reference image(s)");
    ge->add_option("--extra-mask", ge_extra_masks, "Mask(s) for additional references");
    ge->add_option("--samples", ge_samples, "Sample count");
    ge->add_option("--guidance", ge_guidance, "Guidance weight (1 = no CFG)");
    ge->add_option("--gamma", ge_gamma, "Override image-branch scale");
    ge->add_option("--seed", ge_seed, "Sampling seed");
    ge->add_option("--out", ge_out, "Output directory")->required();
    ge->add_flag("--no-adapter", ge_no_adapter, "Run the bare base model");
    ge->add_flag("--renormalize", ge_renormalize, "Renormalize masked attention rows");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Run the metric suite over a manifest");
    std::string ev_manifest, ev_task = "all", ev_generator = "pipeline", ev_checkpoint, ev_out;
    double ev_guidance = 1.0;
    uint64_t ev_seed = 0;
    ev->add_option("--manifest", ev_manifest, "Dataset manifest")->required();
    ev->add_option("--task", ev_task, "all or one edit-task name");
    ev->add_option("--generator", ev_generator, "pipeline|identity");
    ev->add_option("--checkpoint", ev_checkpoint, "Checkpoint for the pipeline generator");
    ev->add_option("--guidance", ev_guidance, "Guidance weight for the pipeline generator");
    ev->add_option("--seed", ev_seed, "Evaluation seed");
    ev->add_option("--out", ev_out, "Output directory")->required();

    // ablate
    auto* ab = app.add_subcommand("ablate", "Train/evaluate a scope x mask x controller grid");
    std::string ab_manifest, ab_out, ab_grid = "scope,mask,controller";
    int ab_steps = 40;
    uint64_t ab_seed = 0;
    ab->add_option("--manifest", ab_manifest, "Dataset manifest")->required();
    ab->add_option("--out", ab_out, "Output directory")->required();
    ab->add_option("--steps", ab_steps, "Training steps per combo");
    ab->add_option("--seed", ab_seed, "Grid seed");
    ab->add_option("--grid", ab_grid, "Axes to cross: scope,mask,controller");

    // inspect-checkpoint
    auto* in = app.add_subcommand("inspect-checkpoint", "Dump checkpoint metadata and shapes");
    std::string in_path;
    in->add_option("path", in_path, "Checkpoint path")->required();

    try {
        app.parse(argc, argv);
        if (bd->parsed())
            return cmd_build_dataset(bd_metadata, bd_taxonomy, bd_out, bd_seed, bd_tasks,
                                     bd_synthesize, bd_image_size, bd_verbose);
        if (tr->parsed())
            return cmd_train(tr_manifest, tr_config, tr_out, tr_controller, tr_steps, tr_seed);
        if (ge->parsed())
            return cmd_generate(ge_checkpoint, ge_reference, ge_mask, ge_prompt, ge_pose,
                                ge_extra_refs, ge_extra_masks, ge_samples, ge_guidance, ge_seed,
                                ge_out, ge_no_adapter, ge_renormalize, ge_gamma);
        if (ev->parsed())
            return cmd_evaluate(ev_manifest, ev_task, ev_generator, ev_checkpoint, ev_guidance,
                                ev_seed, ev_out);
        if (ab->parsed()) return cmd_ablate(ab_manifest, ab_out, ab_steps, ab_seed, ab_grid);
        if (in->parsed()) return cmd_inspect(in_path);
        return 1;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
