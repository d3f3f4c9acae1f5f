#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "aniadapter/manifest.hpp"

using namespace aniadapter;
namespace fs = std::filesystem;

// Shells out to the installed binary; ANIADAPTER_CLI_PATH comes from CMake.

namespace {

struct RunResult {
    int code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path log = fs::temp_directory_path() / ("aniadapter_cli_out_" +
                                                std::to_string(counter++) + ".log");
    std::string cmd = std::string(ANIADAPTER_CLI_PATH) + " " + args + " > " + log.string() +
                      " 2>&1";
    int status = std::system(cmd.c_str());
    RunResult r;
    if (status != -1 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
    std::ifstream f(log);
    std::ostringstream buf;
    buf << f.rdbuf();
    r.output = buf.str();
    fs::remove(log);
    return r;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s)
        if (c == '\n') ++n;
    return n;
}

// One dataset + one trained checkpoint shared across cases; building them is
// the expensive part so it happens once, lazily.
struct Env {
    fs::path root, data_dir, train_dir;
    std::string manifest;
    std::string checkpoint;
    std::vector<ManifestEntry> entries;

    Env() {
        root = fs::temp_directory_path() / "aniadapter_cli_tests";
        fs::remove_all(root);
        fs::create_directories(root);

        fs::path metadata = root / "metadata.jsonl";
        std::ofstream meta(metadata);
        meta << R"({"tag_string_general":"1girl, solo, smile, long hair, standing, simple background, hair flip","tag_string_character":"","tag_string_artist":"","rating":"g"})"
             << "\n"
             << R"({"tag_string_general":"2girls, multiple girls, smile","tag_string_character":"","tag_string_artist":"","rating":"g"})"
             << "\n"
             << R"({"tag_string_general":"1boy, solo, pout, waving, white background","tag_string_character":"","tag_string_artist":"","rating":"g"})"
             << "\n"
             << R"({"tag_string_general":"1girl, solo","tag_string_character":"","tag_string_artist":"","rating":"e"})"
             << "\n";
        meta.close();

        data_dir = root / "dataset";
        RunResult build = run_cli("build-dataset --metadata " + metadata.string() + " --out " +
                                  data_dir.string() + " --seed 11");
        REQUIRE(build.code == 0);
        build_output = build.output;
        manifest = (data_dir / "manifest.jsonl").string();
        entries = parse_manifest(manifest);

        train_dir = root / "train";
        RunResult train = run_cli("train --manifest " + manifest + " --out " +
                                  train_dir.string() + " --steps 25 --seed 3");
        REQUIRE(train.code == 0);
        train_output = train.output;
        checkpoint = (train_dir / "adapter.ckpt").string();
    }

    std::string build_output, train_output;
};

const Env& env() {
    static Env e;
    return e;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run_cli("").code == 1);
    CHECK(run_cli("frobnicate").code == 1);
    CHECK(run_cli("build-dataset --out /tmp/x").code == 1);  // missing --metadata
    CHECK(run_cli("generate --checkpoint a --reference b --out c").code == 1);
    CHECK(run_cli("train --manifest " + env().manifest + " --out /tmp/x --bogus-flag").code == 1);
    CHECK(run_cli("--help").code == 0);
}

TEST_CASE("usage errors behind parsing exit 1") {
    fs::path out = env().root / "usage_out";
    CHECK(run_cli("evaluate --manifest " + env().manifest + " --generator teapot --out " +
                  out.string())
              .code == 1);
    CHECK(run_cli("evaluate --manifest " + env().manifest + " --generator pipeline --out " +
                  out.string())
              .code == 1);  // pipeline without --checkpoint
    CHECK(run_cli("ablate --manifest " + env().manifest + " --grid nothing --out " +
                  out.string())
              .code == 1);
}

TEST_CASE("data errors exit 2") {
    fs::path out = env().root / "data_out";
    CHECK(run_cli("build-dataset --metadata /nonexistent/meta.jsonl --out " + out.string())
              .code == 2);
    // Unknown task names are a data problem, caught before metadata is read.
    CHECK(run_cli("build-dataset --metadata nope.jsonl --tasks scene,dance --out " +
                  out.string())
              .code == 2);
    CHECK(run_cli("train --manifest /nonexistent/manifest.jsonl --out " + out.string()).code ==
          2);
    CHECK(run_cli("generate --checkpoint /nonexistent/adapter.ckpt --reference x.pgm "
                  "--prompt hi --out " +
                  out.string())
              .code == 2);
    CHECK(run_cli("inspect-checkpoint /nonexistent/adapter.ckpt").code == 2);
}

TEST_CASE("truncated checkpoints are rejected as data errors") {
    std::string blob = read_file(env().checkpoint);
    fs::path cut = env().root / "truncated.ckpt";
    std::ofstream(cut, std::ios::binary) << blob.substr(0, blob.size() / 2);
    RunResult r = run_cli("inspect-checkpoint " + cut.string());
    CHECK(r.code == 2);

    const ManifestEntry& e0 = env().entries.front();
    RunResult g = run_cli("generate --checkpoint " + cut.string() + " --reference " +
                          (env().data_dir / e0.image_path).string() +
                          " --prompt \"1girl, solo\" --out " +
                          (env().root / "trunc_gen").string());
    CHECK(g.code == 2);
}

TEST_CASE("diverged training exits with the backend code") {
    fs::path cfg_path = env().root / "diverge.config";
    std::ofstream(cfg_path) << "lr = 1e200\n";
    RunResult r = run_cli("train --manifest " + env().manifest + " --config " +
                          cfg_path.string() + " --steps 5 --out " +
                          (env().root / "diverge_out").string());
    CHECK(r.code == 3);
}

TEST_CASE("build-dataset filters records and emits assets") {
    const Env& e = env();
    CHECK(e.build_output.find("metadata records: 4") != std::string::npos);
    CHECK(e.build_output.find("accepted: 2") != std::string::npos);
    CHECK(e.build_output.find("rejected (multiple characters): 1") != std::string::npos);
    CHECK(e.build_output.find("rejected (rating): 1") != std::string::npos);

    REQUIRE(e.entries.size() == 2);
    for (const ManifestEntry& entry : e.entries) {
        CHECK(fs::exists(e.data_dir / entry.image_path));
        CHECK(fs::exists(e.data_dir / entry.mask_path));
        CHECK(fs::exists(e.data_dir / entry.pose_path));
        CHECK(entry.prompts.edits.size() == 5);
        CHECK_FALSE(entry.prompts.training.empty());
    }

    std::string run_cfg = read_file(e.data_dir / "run.config");
    CHECK(run_cfg.find("subcommand = build-dataset") != std::string::npos);
    CHECK(run_cfg.find("seed = 11") != std::string::npos);
}

TEST_CASE("train writes checkpoint, loss log and run config") {
    const Env& e = env();
    CHECK(e.train_output.find("freeze audit: ok") != std::string::npos);
    CHECK(fs::exists(e.checkpoint));
    std::string losses = read_file(e.train_dir / "train_loss.txt");
    CHECK(count_lines(losses) == 25);
    std::string run_cfg = read_file(e.train_dir / "run.config");
    CHECK(run_cfg.find("subcommand = train") != std::string::npos);
    CHECK(run_cfg.find("steps = 25") != std::string::npos);
}

TEST_CASE("generate is seed-deterministic") {
    const Env& e = env();
    const ManifestEntry& e0 = e.entries.front();
    std::string common = "generate --checkpoint " + e.checkpoint + " --reference " +
                         (e.data_dir / e0.image_path).string() + " --mask " +
                         (e.data_dir / e0.mask_path).string() +
                         " --prompt \"1girl, solo, smile\" --samples 2 --seed 99 --out ";

    REQUIRE(run_cli(common + (e.root / "gen_a").string()).code == 0);
    REQUIRE(run_cli(common + (e.root / "gen_b").string()).code == 0);

    std::string a0 = read_file(e.root / "gen_a" / "sample00.pgm");
    std::string b0 = read_file(e.root / "gen_b" / "sample00.pgm");
    CHECK(a0 == b0);
    std::string a1 = read_file(e.root / "gen_a" / "sample01.pgm");
    CHECK(read_file(e.root / "gen_b" / "sample01.pgm") == a1);
    CHECK(a0 != a1);  // distinct noise per sample
}

TEST_CASE("no-adapter equals a zero image branch") {
    const Env& e = env();
    const ManifestEntry& e0 = e.entries.front();
    std::string common = "generate --checkpoint " + e.checkpoint + " --reference " +
                         (e.data_dir / e0.image_path).string() + " --mask " +
                         (e.data_dir / e0.mask_path).string() +
                         " --prompt \"1girl, solo, smile\" --seed 7 --out ";

    REQUIRE(run_cli(common + (e.root / "gen_off").string() + " --no-adapter").code == 0);
    REQUIRE(run_cli(common + (e.root / "gen_zero").string() + " --gamma 0").code == 0);
    REQUIRE(run_cli(common + (e.root / "gen_on").string()).code == 0);

    std::string off = read_file(e.root / "gen_off" / "sample00.pgm");
    std::string zero = read_file(e.root / "gen_zero" / "sample00.pgm");
    std::string on = read_file(e.root / "gen_on" / "sample00.pgm");
    CHECK(off == zero);
    CHECK(on != off);  // a trained adapter changes the output
}

TEST_CASE("inspect-checkpoint reports metadata and sites") {
    RunResult r = run_cli("inspect-checkpoint " + env().checkpoint);
    CHECK(r.code == 0);
    CHECK(r.output.find("archive ok") != std::string::npos);
    CHECK(r.output.find("scope full_blocks") != std::string::npos);
    CHECK(r.output.find("sites: down0 down1 mid0 up0 up1") != std::string::npos);
    CHECK(r.output.find("step 25") != std::string::npos);
    CHECK(r.output.find("tensor agg.alphas") != std::string::npos);
}

TEST_CASE("up-blocks scope narrows the stored sites") {
    const Env& e = env();
    fs::path cfg_path = e.root / "up.config";
    std::ofstream(cfg_path) << "scope = up_blocks\n";
    fs::path out = e.root / "train_up";
    REQUIRE(run_cli("train --manifest " + e.manifest + " --config " + cfg_path.string() +
                    " --steps 5 --out " + out.string())
                .code == 0);
    RunResult r = run_cli("inspect-checkpoint " + (out / "adapter.ckpt").string());
    CHECK(r.code == 0);
    CHECK(r.output.find("scope up_blocks") != std::string::npos);
    CHECK(r.output.find("sites: up0 up1") != std::string::npos);
    CHECK(r.output.find("down0") == std::string::npos);
}

TEST_CASE("evaluate identity generator writes a full report") {
    const Env& e = env();
    fs::path out = e.root / "eval_identity";
    RunResult r = run_cli("evaluate --manifest " + e.manifest +
                          " --generator identity --task scene --seed 1 --out " + out.string());
    REQUIRE(r.code == 0);

    nlohmann::json report = nlohmann::json::parse(read_file(out / "report.json"));
    REQUIRE(report["tasks"].size() == 2);
    CHECK(report["tasks"][0]["task"] == "scene");
    CHECK(report["tasks"][0]["cases"] == 2);
    CHECK(report["tasks"][0]["generator_failures"] == 0);
    double clip_i = report["tasks"][0]["metrics"]["clip_i_masked"];
    CHECK(clip_i == doctest::Approx(1.0).epsilon(1e-6));
    double psnr_v = report["tasks"][0]["metrics"]["psnr"];
    CHECK(psnr_v == doctest::Approx(100.0).epsilon(1e-9));

    // 2 cases x 5 always-on metrics, one row each.
    CHECK(count_lines(read_file(out / "cases.jsonl")) == 10);
    CHECK(read_file(out / "report.txt").find("[all]") != std::string::npos);
}

TEST_CASE("evaluate pipeline generator samples from the checkpoint") {
    const Env& e = env();
    fs::path out = e.root / "eval_pipeline";
    RunResult r = run_cli("evaluate --manifest " + e.manifest +
                          " --generator pipeline --checkpoint " + e.checkpoint +
                          " --task expression --seed 2 --out " + out.string());
    REQUIRE(r.code == 0);
    nlohmann::json report = nlohmann::json::parse(read_file(out / "report.json"));
    CHECK(report["tasks"][0]["task"] == "expression");
    CHECK(report["tasks"][0]["cases"] == 2);
    CHECK(report["tasks"][0]["samples"] == 8);
    CHECK(report["tasks"][0]["generator_failures"] == 0);
    double clip_i = report["tasks"][0]["metrics"]["clip_i_masked"];
    CHECK(clip_i > -1.0);
    CHECK(clip_i < 1.0 + 1e-12);
}

TEST_CASE("ablate covers the requested axis") {
    const Env& e = env();
    fs::path out = e.root / "ablate_out";
    RunResult r = run_cli("ablate --manifest " + e.manifest +
                          " --grid mask --steps 5 --seed 4 --out " + out.string());
    REQUIRE(r.code == 0);

    std::string table = read_file(out / "ablation.txt");
    CHECK(table.find("combo final_loss") != std::string::npos);
    CHECK(table.find("full_blocks/mask/t2i") != std::string::npos);
    CHECK(table.find("full_blocks/nomask/t2i") != std::string::npos);

    nlohmann::json rows = nlohmann::json::parse(read_file(out / "ablation.json"));
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row["final_loss"].get<double>() > 0.0);
        CHECK(row.contains("clip_i_masked"));
    }
}
