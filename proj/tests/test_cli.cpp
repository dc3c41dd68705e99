#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout and stderr interleaved
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    std::array<char, 1024> buf;
    while (size_t n = fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch() {
    static const fs::path root = [] {
        const fs::path p = fs::temp_directory_path() / "cli_scratch";
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

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path cli_corpus() {
    static const fs::path dir = [] {
        const fs::path p = scratch() / "corpus";
        const RunResult r =
            run_cli("corpus --out " + q(p) + " --count 2 --frames 2 --seed 3");
        REQUIRE(r.exit_code == 0);
        return p;
    }();
    return dir;
}

fs::path cli_model() {
    static const fs::path ckpt = [] {
        const fs::path p = scratch() / "base";
        const RunResult r = run_cli("train-base --out " + q(p) + " --corpus " +
                                    q(cli_corpus()) +
                                    " --steps 2 --channels 4,8 --heads 2"
                                    " --timesteps 50 --seed 5");
        REQUIRE(r.exit_code == 0);
        return p / "model.ckpt";
    }();
    return ckpt;
}

} // namespace

TEST_CASE("usage problems exit 2 and point at help") {
    const RunResult none = run_cli("");
    CHECK(none.exit_code == 2);
    CHECK(none.output.find("usage error") != std::string::npos);
    CHECK(none.output.find("--help") != std::string::npos);

    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("corpus --no-such-flag 1").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("corpus --help").exit_code == 0);
    const RunResult ver = run_cli("--version");
    CHECK(ver.exit_code == 0);
    CHECK(ver.output.find("motionlab") != std::string::npos);
}

TEST_CASE("categorized failures exit 1 with the category in the message") {
    const RunResult bad_value =
        run_cli("corpus --out " + q(scratch() / "x1") + " --count many");
    CHECK(bad_value.exit_code == 1);
    CHECK(bad_value.output.find("error (config):") != std::string::npos);
    CHECK(bad_value.output.find("count") != std::string::npos);

    const RunResult no_corpus = run_cli("train-base --out " + q(scratch() / "x2"));
    CHECK(no_corpus.exit_code == 1);
    CHECK(no_corpus.output.find("error (config):") != std::string::npos);

    const RunResult missing =
        run_cli("generate --out " + q(scratch() / "x3") + " --model " +
                q(scratch() / "nope.ckpt") + " --prompt \"a red square is bouncing\"");
    CHECK(missing.exit_code == 1);
    CHECK(missing.output.find("error (io):") != std::string::npos);

    REQUIRE(fs::exists(cli_corpus()));
    const RunResult reuse = run_cli("corpus --out " + q(cli_corpus()) + " --count 1");
    CHECK(reuse.exit_code == 1);
    CHECK(reuse.output.find("error (io):") != std::string::npos);
}

TEST_CASE("the full pipeline runs through the command line") {
    CHECK(fs::exists(cli_corpus() / "clips/clip_0001.bin"));
    CHECK(fs::exists(cli_corpus() / "index.csv"));
    REQUIRE(fs::exists(cli_model()));

    const fs::path cust = scratch() / "cust";
    CHECK(run_cli("customize --out " + q(cust) + " --base " + q(cli_model()) +
                  " --reference " + q(cli_corpus() / "clips/clip_0000.bin") +
                  " --steps 1 --beta 0 --log-every 1")
              .exit_code == 0);
    CHECK(fs::exists(cust / "model.ckpt"));

    const fs::path gen = scratch() / "gen";
    CHECK(run_cli("generate --out " + q(gen) + " --model " + q(cust / "model.ckpt") +
                  " --prompt \"a blue circle is rising up on a gray plain background\""
                  " --steps 2 --export gif")
              .exit_code == 0);
    CHECK(fs::exists(gen / "clip.bin"));
    CHECK(fs::exists(gen / "clip.gif"));
    CHECK(!fs::exists(gen / "clip.png"));

    const fs::path exp = scratch() / "exp";
    CHECK(run_cli("export --out " + q(exp) + " --clip " + q(gen / "clip.bin") +
                  " --format png")
              .exit_code == 0);
    CHECK(fs::exists(exp / "clip.png"));
}

TEST_CASE("identical seeds reproduce identical artifacts") {
    const std::string tail = " --corpus " + q(cli_corpus()) +
                             " --steps 2 --channels 4,8 --heads 2 --timesteps 50 --seed 5";
    const fs::path again = scratch() / "base_again";
    REQUIRE(run_cli("train-base --out " + q(again) + tail).exit_code == 0);
    CHECK(slurp(again / "model.ckpt") == slurp(cli_model()));
    CHECK(slurp(again / "run.log") == slurp(cli_model().parent_path() / "run.log"));
}

TEST_CASE("config files feed the command line") {
    const fs::path cfg = scratch() / "corpus.cfg";
    {
        std::ofstream out(cfg);
        out << "count = 3\nframes = 2\n";
    }
    const fs::path dir = scratch() / "from_cfg";
    REQUIRE(run_cli("corpus --out " + q(dir) + " --config " + q(cfg) + " --count 1")
                .exit_code == 0);
    CHECK(fs::exists(dir / "clips/clip_0000.bin"));  // flag beat the file
    CHECK(!fs::exists(dir / "clips/clip_0001.bin")); // file's count did not apply
    CHECK(slurp(dir / "config.txt").find("frames = 2") != std::string::npos);
}
