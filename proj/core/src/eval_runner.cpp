#include "aniadapter/eval_runner.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

#include "aniadapter/error.hpp"

namespace aniadapter {

namespace {

using ordered_json = nlohmann::ordered_json;

const std::vector<std::string>& metric_order() {
    static const std::vector<std::string> order = {
        "clip_t", "clip_i_masked", "lpips", "lpips_div", "psnr",
        "fid",    "akd",           "mkr",   "failure"};
    return order;
}

std::string resolve_path(const std::string& path, const std::string& root) {
    if (path.empty() || path.front() == '/' || root.empty()) return path;
    return root + "/" + path;
}

struct MeanAcc {
    double sum = 0.0;
    int n = 0;
    void add(double v) {
        sum += v;
        ++n;
    }
    double mean() const { return sum / double(n); }
};

}  // namespace

const double* TaskSummary::metric(const std::string& name) const {
    for (const auto& [key, value] : metrics)
        if (key == name) return &value;
    return nullptr;
}

const TaskSummary* MetricsReport::task(const std::string& name) const {
    for (const TaskSummary& t : tasks)
        if (t.task == name) return &t;
    return nullptr;
}

std::string MetricsReport::to_text() const {
    std::ostringstream out;
    out << "failure_min_joints " << failure_min_joints << "\n";
    for (const TaskSummary& t : tasks) {
        out << "\n[" << t.task << "] cases=" << t.cases << " samples=" << t.samples
            << " generator_failures=" << t.generator_failures << "\n";
        for (const auto& [name, value] : t.metrics) out << "  " << name << " " << value << "\n";
    }
    return out.str();
}

std::string MetricsReport::to_json() const {
    ordered_json root;
    root["failure_min_joints"] = failure_min_joints;
    ordered_json task_list = ordered_json::array();
    for (const TaskSummary& t : tasks) {
        ordered_json jt;
        jt["task"] = t.task;
        jt["cases"] = t.cases;
        jt["samples"] = t.samples;
        jt["generator_failures"] = t.generator_failures;
        ordered_json metrics;
        for (const auto& [name, value] : t.metrics) metrics[name] = value;
        jt["metrics"] = metrics;
        task_list.push_back(jt);
    }
    root["tasks"] = task_list;
    return root.dump(2);
}

std::string MetricsReport::rows_jsonl() const {
    std::ostringstream out;
    for (const CaseRow& r : rows) {
        ordered_json j;
        j["case"] = r.case_id;
        j["task"] = r.task;
        j["metric"] = r.metric;
        j["value"] = r.value;
        out << j.dump() << "\n";
    }
    return out.str();
}

MetricsReport run_eval(const std::vector<ManifestEntry>& entries,
                       const std::vector<std::string>& tasks, CaseGenerator& generator,
                       EmbeddingBackend& embedder, DistanceBackend& lpips,
                       PoseBackend& pose_extractor, const EvalOptions& options) {
    if (options.samples_per_case != 4)
        throw DataError("evaluation protocol is fixed at 4 samples per case");

    std::vector<std::string> task_names = tasks;
    if (task_names.empty())
        for (EditTask t : all_edit_tasks()) task_names.push_back(edit_task_name(t));
    for (const std::string& name : task_names) edit_task_from_name(name);  // validate

    auto log = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };

    MetricsReport report;
    report.failure_min_joints = options.failure_min_joints;
    std::map<std::string, MeanAcc> overall;
    int overall_cases = 0, overall_samples = 0, overall_failures = 0;

    for (const std::string& task_name : task_names) {
        TaskSummary summary;
        summary.task = task_name;
        std::map<std::string, MeanAcc> acc;
        std::vector<Image> fid_gen, fid_ref;
        std::vector<PixelMask> fid_gen_masks, fid_ref_masks;

        for (const ManifestEntry& entry : entries) {
            auto edit_it = entry.prompts.edits.find(task_name);
            if (edit_it == entry.prompts.edits.end()) continue;
            const EditPrompt& edit = edit_it->second;

            Image ref = read_pgm(resolve_path(entry.image_path, options.asset_root));
            PixelMask ref_mask = read_mask_png(resolve_path(entry.mask_path, options.asset_root));

            PoseSkeleton cond_pose;
            bool have_pose = false;
            if (edit.requires_pose) {
                if (entry.pose_path.empty())
                    throw DataError("case " + entry.id + " needs a pose but the manifest has none");
                cond_pose = PoseSkeleton::load(resolve_path(entry.pose_path, options.asset_root));
                have_pose = true;
            }

            uint64_t case_seed =
                Rng(options.seed).fork("eval " + task_name + " " + entry.id).next_u64();
            std::vector<Image> samples;
            try {
                samples = generator.generate(entry, edit, ref, ref_mask,
                                             have_pose ? &cond_pose : nullptr,
                                             options.samples_per_case, case_seed);
                if (int(samples.size()) != options.samples_per_case)
                    throw BackendError("generator returned " + std::to_string(samples.size()) +
                                       " samples instead of " +
                                       std::to_string(options.samples_per_case));
            } catch (const std::exception& e) {
                ++summary.generator_failures;
                log("generator failure on " + entry.id + " (" + task_name + "): " + e.what());
                continue;
            }

            std::string prompt = render_prompt(edit.tags);
            std::vector<std::string> subject_tags = entry.clusters.c[0];
            subject_tags.insert(subject_tags.end(), entry.clusters.char_name.begin(),
                                entry.clusters.char_name.end());
            std::string subject = render_prompt(subject_tags);

            std::vector<PixelMask> gen_masks;
            for (size_t s = 0; s < samples.size(); ++s) {
                if (options.sample_segmenter)
                    gen_masks.push_back(options.sample_segmenter->segment(
                        {samples[s], subject}, entry.id + "#" + std::to_string(s)));
                else
                    gen_masks.push_back(ref_mask);
            }

            std::map<std::string, double> case_metrics;
            MeanAcc m_clip_t, m_clip_i, m_lpips, m_psnr;
            Image ref_fg = white_composite(ref, ref_mask);
            for (size_t s = 0; s < samples.size(); ++s) {
                m_clip_t.add(clip_t(samples[s], prompt, embedder));
                m_clip_i.add(
                    masked_clip_i(samples[s], ref, gen_masks[s], ref_mask, embedder));
                m_lpips.add(lpips.distance(white_composite(samples[s], gen_masks[s]), ref_fg));
                m_psnr.add(psnr(samples[s], ref, ref_mask));
            }
            case_metrics["clip_t"] = m_clip_t.mean();
            case_metrics["clip_i_masked"] = m_clip_i.mean();
            case_metrics["lpips"] = m_lpips.mean();
            case_metrics["lpips_div"] = diversity(samples, lpips);
            case_metrics["psnr"] = m_psnr.mean();

            if (edit.requires_pose) {
                std::vector<PoseSkeleton> gen_poses;
                for (size_t s = 0; s < samples.size(); ++s)
                    gen_poses.push_back(pose_extractor.extract(
                        samples[s], entry.id + "#" + std::to_string(s)));
                MeanAcc m_akd, m_mkr;
                for (const PoseSkeleton& gp : gen_poses) {
                    AkdMkr km = akd_mkr(gp, cond_pose);
                    if (!km.valid) continue;
                    m_mkr.add(km.mkr);
                    if (km.akd_valid) m_akd.add(km.akd);
                }
                if (m_akd.n > 0) case_metrics["akd"] = m_akd.mean();
                if (m_mkr.n > 0) case_metrics["mkr"] = m_mkr.mean();
                case_metrics["failure"] =
                    failure_rate(gen_poses, options.failure_min_joints);
            }

            for (const std::string& name : metric_order()) {
                auto it = case_metrics.find(name);
                if (it == case_metrics.end()) continue;
                report.rows.push_back({entry.id, task_name, name, it->second});
                acc[name].add(it->second);
                overall[name].add(it->second);
            }

            fid_ref.push_back(ref);
            fid_ref_masks.push_back(ref_mask);
            for (size_t s = 0; s < samples.size(); ++s) {
                fid_gen.push_back(samples[s]);
                fid_gen_masks.push_back(gen_masks[s]);
            }
            ++summary.cases;
            summary.samples += int(samples.size());
        }

        if (fid_gen.size() >= 2 && fid_ref.size() >= 2)
            acc["fid"].add(fid(fid_gen, fid_gen_masks, fid_ref, fid_ref_masks, embedder));

        for (const std::string& name : metric_order()) {
            auto it = acc.find(name);
            if (it != acc.end()) summary.metrics.emplace_back(name, it->second.mean());
        }
        if (const double* task_fid = summary.metric("fid")) overall["fid"].add(*task_fid);
        overall_cases += summary.cases;
        overall_samples += summary.samples;
        overall_failures += summary.generator_failures;
        report.tasks.push_back(std::move(summary));
    }

    TaskSummary all;
    all.task = "all";
    all.cases = overall_cases;
    all.samples = overall_samples;
    all.generator_failures = overall_failures;
    for (const std::string& name : metric_order()) {
        auto it = overall.find(name);
        if (it != overall.end()) all.metrics.emplace_back(name, it->second.mean());
    }
    report.tasks.push_back(std::move(all));
    return report;
}

}  // namespace aniadapter
