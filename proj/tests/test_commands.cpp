#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "motionlab/commands.hpp"
#include "motionlab/corpus.hpp"
#include "motionlab/io.hpp"

using namespace motionlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    static const fs::path root = [] {
        const fs::path p = fs::temp_directory_path() / "cmd_scratch";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<nlohmann::json> read_log(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line)) out.push_back(nlohmann::json::parse(line));
    return out;
}

ErrCat category_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.category();
    }
    FAIL("expected an error");
    return ErrCat::internal;
}

// small corpus shared by the pipeline tests
fs::path tiny_corpus() {
    static const fs::path dir = [] {
        const fs::path p = scratch() / "corpus";
        run_command("corpus", {{"out", p.string()},
                               {"count", "4"},
                               {"frames", "2"},
                               {"size", "16"},
                               {"seed", "3"}});
        return p;
    }();
    return dir;
}

// a base model trained a few steps on the tiny corpus
fs::path tiny_base() {
    static const fs::path ckpt = [] {
        const fs::path p = scratch() / "base";
        run_command("train-base", {{"out", p.string()},
                                   {"corpus", tiny_corpus().string()},
                                   {"steps", "6"},
                                   {"batch", "2"},
                                   {"log_every", "2"},
                                   {"channels", "4,8"},
                                   {"heads", "2"},
                                   {"timesteps", "50"},
                                   {"seed", "5"}});
        return p / "model.ckpt";
    }();
    return ckpt;
}

} // namespace

TEST_CASE("command registry") {
    const auto names = command_names();
    CHECK(names.size() == 6);
    CHECK(std::count(names.begin(), names.end(), "corpus") == 1);
    CHECK(std::count(names.begin(), names.end(), "evaluate") == 1);

    const auto keys = command_keys("generate");
    for (const char* k : {"config", "out", "seed", "deterministic", "model", "prompt",
                          "steps", "eta", "export"})
        CHECK(keys.count(k) == 1);
    CHECK(keys.count("beta") == 0);
    CHECK(category_of([] { command_keys("bogus"); }) == ErrCat::config);
}

TEST_CASE("corpus command writes clips, index, and a replayable snapshot") {
    const fs::path dir = tiny_corpus();

    for (int i = 0; i < 4; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "clips/clip_%04d.bin", i);
        CAPTURE(i);
        REQUIRE(fs::exists(dir / name));
        const LatentClip<float> clip = load_clip((dir / name).string());
        CHECK(clip.latent.shape() == Shape{1, 2, 16, 16, 3});
        CHECK_NOTHROW(parse_prompt(clip.prompt)); // prompt survives the round trip
    }
    CHECK(!fs::exists(dir / "clips/clip_0004.bin"));

    const std::string index = slurp(dir / "index.csv");
    CHECK(std::count(index.begin(), index.end(), '\n') == 5);
    CHECK(index.rfind("file,prompt,motion,", 0) == 0);

    const std::string snap = slurp(dir / "config.txt");
    CHECK(snap.find("count = 4\n") != std::string::npos);
    CHECK(snap.find("seed = 3\n") != std::string::npos);
    CHECK(snap.find("deterministic = true\n") != std::string::npos);
    CHECK(snap.find("out") == std::string::npos); // snapshot stays path free

    const auto log = read_log(dir / "run.log");
    REQUIRE(log.size() == 6); // start, 4 clips, done
    CHECK(log.front().at("event") == "start");
    CHECK(log.front().at("command") == "corpus");
    CHECK(log.back().at("event") == "done");
    CHECK(log.back().at("clips") == 4);
}

TEST_CASE("config file fills unset keys and explicit overrides win") {
    const fs::path cfg = scratch() / "corpus.cfg";
    {
        std::ofstream out(cfg);
        out << "# tiny corpus preset\ncount = 5\nframes = 2\nsize = 16\n";
    }

    const fs::path from_file = scratch() / "from_file";
    run_command("corpus", {{"out", from_file.string()}, {"config", cfg.string()}});
    CHECK(fs::exists(from_file / "clips/clip_0004.bin")); // file beat the default 64
    CHECK(!fs::exists(from_file / "clips/clip_0005.bin"));

    const fs::path flag_wins = scratch() / "flag_wins";
    run_command("corpus",
                {{"out", flag_wins.string()}, {"config", cfg.string()}, {"count", "2"}});
    CHECK(fs::exists(flag_wins / "clips/clip_0001.bin"));
    CHECK(!fs::exists(flag_wins / "clips/clip_0002.bin"));
    // the snapshot records the merged result, so it replays without the file
    CHECK(slurp(flag_wins / "config.txt").find("count = 2\n") != std::string::npos);
    CHECK(slurp(flag_wins / "config.txt").find("config") == std::string::npos);
}

TEST_CASE("bad invocations are rejected before any work") {
    const fs::path out = scratch() / "rejects";
    CHECK(category_of([&] { run_command("nope", {{"out", out.string()}}); }) == ErrCat::config);
    CHECK(category_of([&] {
              run_command("corpus", {{"out", out.string()}, {"shoes", "2"}});
          }) == ErrCat::config);
    CHECK(category_of([&] {
              run_command("corpus", {{"out", out.string()}, {"count", "many"}});
          }) == ErrCat::config);
    CHECK(category_of([&] {
              run_command("corpus", {{"out", out.string()}, {"deterministic", "maybe"}});
          }) == ErrCat::config);
    CHECK(category_of([&] { run_command("train-base", {{"out", out.string()}}); }) ==
          ErrCat::config); // corpus is required
    CHECK(category_of([&] { run_command("corpus", {{"count", "1"}}); }) == ErrCat::config);
    CHECK(!fs::exists(out)); // nothing above may have created the run dir

    // the stage constraint surfaces as a config error, after the dir exists
    CHECK(category_of([&] {
              run_command("corpus", {{"out", (scratch() / "small").string()}, {"size", "8"}});
          }) == ErrCat::config);

    // an existing nonempty directory is never reused
    CHECK(category_of([&] {
              run_command("corpus", {{"out", tiny_corpus().string()}, {"count", "1"}});
          }) == ErrCat::io);
    CHECK(fs::exists(tiny_corpus() / "clips/clip_0003.bin")); // prior artifacts untouched
}

TEST_CASE("train-base is reproducible byte for byte") {
    REQUIRE(fs::exists(tiny_base()));

    const auto log = read_log(tiny_base().parent_path() / "run.log");
    REQUIRE(log.size() >= 3);
    CHECK(log.front().at("event") == "start");
    int steps_seen = 0;
    for (const auto& rec : log)
        if (rec.at("event") == "step") {
            CHECK(rec.at("phase") == "base");
            CHECK(std::isfinite(rec.at("loss").get<double>()));
            ++steps_seen;
        }
    CHECK(steps_seen >= 3);

    const fs::path again = scratch() / "base_again";
    run_command("train-base", {{"out", again.string()},
                               {"corpus", tiny_corpus().string()},
                               {"steps", "6"},
                               {"batch", "2"},
                               {"log_every", "2"},
                               {"channels", "4,8"},
                               {"heads", "2"},
                               {"timesteps", "50"},
                               {"seed", "5"}});
    CHECK(slurp(again / "run.log") == slurp(tiny_base().parent_path() / "run.log"));
    CHECK(slurp(again / "model.ckpt") == slurp(tiny_base()));

    const fs::path other = scratch() / "base_seed1";
    run_command("train-base", {{"out", other.string()},
                               {"corpus", tiny_corpus().string()},
                               {"steps", "6"},
                               {"batch", "2"},
                               {"log_every", "2"},
                               {"channels", "4,8"},
                               {"heads", "2"},
                               {"timesteps", "50"},
                               {"seed", "1"}});
    CHECK(slurp(other / "model.ckpt") != slurp(tiny_base()));
}

TEST_CASE("customize with zero steps copies the base checkpoint exactly") {
    const fs::path dir = scratch() / "cust0";
    run_command("customize", {{"out", dir.string()},
                              {"base", tiny_base().string()},
                              {"reference", (tiny_corpus() / "clips/clip_0000.bin").string()},
                              {"steps", "0"}});
    CHECK(slurp(dir / "model.ckpt") == slurp(tiny_base()));
}

TEST_CASE("customize runs both phases and writes a loadable checkpoint") {
    const fs::path dir = scratch() / "cust";
    run_command("customize", {{"out", dir.string()},
                              {"base", tiny_base().string()},
                              {"reference", (tiny_corpus() / "clips/clip_0001.bin").string()},
                              {"steps", "3"},
                              {"spatial_steps", "2"},
                              {"log_every", "1"},
                              {"seed", "11"}});
    CHECK(slurp(dir / "model.ckpt") != slurp(tiny_base()));
    CHECK_NOTHROW(load_checkpoint((dir / "model.ckpt").string()));

    int spatial = 0, motion = 0;
    for (const auto& rec : read_log(dir / "run.log"))
        if (rec.at("event") == "step") {
            if (rec.at("phase") == "spatial") ++spatial;
            if (rec.at("phase") == "motion") ++motion;
        }
    CHECK(spatial == 2);
    CHECK(motion == 3);
}

TEST_CASE("generate samples a clip and exports the requested formats") {
    const fs::path dir = scratch() / "gen";
    const std::string prompt = "a red square is sliding right on a gray plain background";
    run_command("generate", {{"out", dir.string()},
                             {"model", tiny_base().string()},
                             {"prompt", prompt},
                             {"steps", "3"},
                             {"seed", "2"}});
    const LatentClip<float> clip = load_clip((dir / "clip.bin").string());
    CHECK(clip.latent.shape() == Shape{1, 2, 16, 16, 3});
    CHECK(detokenize(clip.prompt) == prompt);
    CHECK(fs::exists(dir / "clip.png"));
    CHECK(fs::exists(dir / "clip.gif"));

    const fs::path bare = scratch() / "gen_bare";
    run_command("generate", {{"out", bare.string()},
                             {"model", tiny_base().string()},
                             {"prompt", prompt},
                             {"steps", "3"},
                             {"seed", "2"},
                             {"export", "none"}});
    CHECK(fs::exists(bare / "clip.bin"));
    CHECK(!fs::exists(bare / "clip.png"));
    CHECK(!fs::exists(bare / "clip.gif"));
    CHECK(slurp(bare / "clip.bin") == slurp(dir / "clip.bin")); // export choice is cosmetic

    CHECK(category_of([&] {
              run_command("generate", {{"out", (scratch() / "gen_bad").string()},
                                       {"model", tiny_base().string()},
                                       {"prompt", "a teapot is orbiting"},
                                       {"steps", "2"}});
          }) == ErrCat::input);
}

TEST_CASE("evaluate writes a deterministic metric table over the full protocol") {
    const fs::path dir = scratch() / "eval";
    const std::map<std::string, std::string> args = {{"model", tiny_base().string()},
                                                     {"steps", "2"},
                                                     {"n_basic", "1"},
                                                     {"n_complex", "0"},
                                                     {"seed", "4"}};
    auto with_out = [&](const fs::path& p) {
        auto a = args;
        a["out"] = p.string();
        return a;
    };
    run_command("evaluate", with_out(dir));

    const std::string csv = slurp(dir / "metrics.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9); // header + 8 kinds x 1 prompt
    const auto log = read_log(dir / "run.log");
    int rows = 0;
    for (const auto& rec : log)
        if (rec.at("event") == "row") ++rows;
    CHECK(rows == 8);
    CHECK(log.back().at("event") == "summary");
    CHECK(log.back().at("failed_rows") == 0);

    const fs::path again = scratch() / "eval_again";
    run_command("evaluate", with_out(again));
    CHECK(slurp(again / "metrics.csv") == csv);
    CHECK(slurp(again / "run.log") == slurp(dir / "run.log"));
}

TEST_CASE("evaluate keeps its artifacts when rows fail") {
    // a model whose vocabulary cannot express the protocol prompts: every
    // row fails to sample, and the command reports a partial result
    UNetConfig cfg;
    cfg.frames = 2;
    cfg.size = 8;
    cfg.channels = {4};
    cfg.heads = 2;
    cfg.vocab = 4;
    cfg.timesteps = 20;
    const Model<float> m = make_model<float>(cfg, 1);
    const fs::path ckpt = scratch() / "latched.ckpt";
    save_checkpoint(m, ckpt.string());

    const fs::path dir = scratch() / "eval_partial";
    CHECK(category_of([&] {
              run_command("evaluate", {{"out", dir.string()},
                                       {"model", ckpt.string()},
                                       {"steps", "2"},
                                       {"n_basic", "1"},
                                       {"n_complex", "0"}});
          }) == ErrCat::partial);
    const std::string csv = slurp(dir / "metrics.csv"); // table written before the throw
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
    CHECK(csv.find("failed") != std::string::npos);
}

TEST_CASE("export renders an existing clip file") {
    const fs::path dir = scratch() / "exp";
    run_command("export", {{"out", dir.string()},
                           {"clip", (tiny_corpus() / "clips/clip_0002.bin").string()},
                           {"format", "gif"}});
    CHECK(fs::exists(dir / "clip.gif"));
    CHECK(!fs::exists(dir / "clip.png"));

    CHECK(category_of([&] {
              run_command("export", {{"out", (scratch() / "exp_bad").string()},
                                     {"clip", (tiny_corpus() / "clips/clip_0002.bin").string()},
                                     {"format", "webm"}});
          }) == ErrCat::config);
}

TEST_CASE("evaluate reproduces the shipped fixture table byte for byte") {
    // fixture provenance: the checkpoint and table were produced once by
    //   corpus     --out R/corpus --count 4 --frames 2 --seed 3
    //   train-base --out R/base --corpus R/corpus --steps 4 --channels 4,8
    //              --heads 2 --timesteps 50 --seed 5
    //   evaluate   --out R/eval --model R/base/model.ckpt --steps 2
    //              --n-basic 1 --n-complex 0 --seed 4
    // and any drift in sampling, scoring, or serialization shows up here
    const fs::path fixtures = fs::path(FIXTURE_DIR);
    const fs::path dir = scratch() / "golden";
    run_command("evaluate", {{"out", dir.string()},
                             {"model", (fixtures / "eval_model.ckpt").string()},
                             {"steps", "2"},
                             {"n_basic", "1"},
                             {"n_complex", "0"},
                             {"seed", "4"}});
    CHECK(slurp(dir / "metrics.csv") == slurp(fixtures / "eval_metrics.csv"));
}
