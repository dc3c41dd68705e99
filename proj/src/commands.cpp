#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "motionlab/commands.hpp"
#include "motionlab/customize.hpp"
#include "motionlab/io.hpp"
#include "motionlab/metrics.hpp"
#include "motionlab/train.hpp"

namespace fs = std::filesystem;

namespace motionlab {

namespace {

// common keys every command accepts
const std::set<std::string> kCommonKeys = {"config", "out", "seed", "deterministic"};

struct CommandDef {
    std::map<std::string, std::string> defaults; // command-specific, sans required keys
    std::set<std::string> required;              // keys that must be provided
};

const std::map<std::string, CommandDef>& command_table() {
    static const std::map<std::string, CommandDef> table = {
        {"corpus", {{{"count", "64"}, {"frames", "8"}, {"size", "16"}}, {}}},
        {"train-base",
         {{{"steps", "3000"},
           {"batch", "2"},
           {"lr", "2e-4"},
           {"log_every", "50"},
           {"channels", "32,64"},
           {"heads", "4"},
           {"timesteps", "1000"}},
          {"corpus"}}},
        {"customize",
         {{{"steps", "400"},
           {"spatial_steps", "0"},
           {"lr", "1e-4"},
           {"beta", "5.0"},
           {"log_every", "10"}},
          {"base", "reference"}}},
        {"generate",
         {{{"steps", "20"}, {"eta", "0"}, {"export", "both"}}, {"model", "prompt"}}},
        {"evaluate",
         {{{"steps", "20"}, {"eta", "0"}, {"n_basic", "3"}, {"n_complex", "3"}}, {"model"}}},
        {"export", {{{"format", "both"}}, {"clip"}}},
    };
    return table;
}

const CommandDef& lookup(const std::string& name) {
    const auto it = command_table().find(name);
    require(it != command_table().end(), ErrCat::config, "unknown command '" + name + "'");
    return it->second;
}

int64_t to_i64(const std::string& key, const std::string& v);
double to_f64(const std::string& key, const std::string& v);
bool to_bool(const std::string& key, const std::string& v);
std::vector<int> to_int_list(const std::string& key, const std::string& v);

// every key has one type across all commands; checking values up front
// means a bad invocation fails before the run directory exists
void check_value(const std::string& key, const std::string& v) {
    static const std::set<std::string> ints = {"count",   "frames",    "size",  "steps",
                                               "batch",   "log_every", "heads", "timesteps",
                                               "spatial_steps", "n_basic", "n_complex", "seed"};
    static const std::set<std::string> nums = {"lr", "beta", "eta"};
    if (ints.count(key)) to_i64(key, v);
    else if (nums.count(key)) to_f64(key, v);
    else if (key == "channels") to_int_list(key, v);
    else if (key == "deterministic") to_bool(key, v);
    else if (key == "export" || key == "format")
        require(v == "png" || v == "gif" || v == "both" || v == "none", ErrCat::config,
                "key '" + key + "' wants png, gif, both, or none");
}

// effective config: defaults, then file values, then explicit overrides
std::map<std::string, std::string> merge_config(const CommandDef& def,
                                                const std::set<std::string>& allowed,
                                                const std::map<std::string, std::string>& over) {
    for (const auto& [k, v] : over) {
        (void)v;
        require(allowed.count(k) != 0, ErrCat::config, "unknown key '" + k + "'");
    }
    std::map<std::string, std::string> eff = def.defaults;
    eff["seed"] = "0";
    eff["deterministic"] = "true";

    const auto cfg_flag = over.find("config");
    if (cfg_flag != over.end()) {
        std::set<std::string> file_keys = allowed;
        file_keys.erase("config"); // a config file cannot chain to another
        file_keys.erase("out");    // the run directory is always named explicitly
        for (auto& [k, v] : read_config_file(cfg_flag->second, file_keys)) eff[k] = v;
    }
    for (const auto& [k, v] : over) eff[k] = v;
    for (const std::string& k : def.required)
        require(eff.count(k) != 0, ErrCat::config, "missing required key '" + k + "'");
    for (const auto& [k, v] : eff) check_value(k, v);
    return eff;
}

int64_t to_i64(const std::string& key, const std::string& v) {
    int64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && p == v.data() + v.size(), ErrCat::config,
            "key '" + key + "' wants an integer, got '" + v + "'");
    return out;
}

double to_f64(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    require(end == v.c_str() + v.size() && !v.empty(), ErrCat::config,
            "key '" + key + "' wants a number, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    fail(ErrCat::config, "key '" + key + "' wants a boolean, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos <= v.size()) {
        const size_t comma = std::min(v.find(',', pos), v.size());
        out.push_back(int(to_i64(key, v.substr(pos, comma - pos))));
        pos = comma + 1;
    }
    return out;
}

struct Run {
    std::string name;
    std::map<std::string, std::string> kv;
    fs::path dir;
    std::unique_ptr<RunLog> log;

    const std::string& gets(const std::string& k) const { return kv.at(k); }
    int64_t geti(const std::string& k) const { return to_i64(k, kv.at(k)); }
    double getd(const std::string& k) const { return to_f64(k, kv.at(k)); }

    fs::path artifact(const std::string& rel) const { return dir / rel; }
};

// one fresh directory per invocation: refusing to reuse a nonempty one
// keeps every run auditable and no artifact silently overwritten
Run open_run(const std::string& name, const std::map<std::string, std::string>& eff) {
    Run run;
    run.name = name;
    run.kv = eff;
    require(eff.count("out") != 0, ErrCat::config, "missing required key 'out'");
    run.dir = fs::path(eff.at("out"));
    std::error_code ec;
    if (fs::exists(run.dir, ec))
        require(fs::is_directory(run.dir, ec) && fs::is_empty(run.dir, ec), ErrCat::io,
                "output directory exists and is not empty: " + run.dir.string());
    fs::create_directories(run.dir, ec);
    require(!ec, ErrCat::io, "cannot create output directory: " + run.dir.string());

    // the snapshot replays through --config: paths that vary per invocation
    // stay out of it, everything else round-trips
    std::ofstream snap(run.dir / "config.txt");
    for (const auto& [k, v] : eff)
        if (k != "out" && k != "config") snap << k << " = " << v << "\n";
    require(snap.good(), ErrCat::io, "cannot write config snapshot in " + run.dir.string());
    snap.close();

    run.log = std::make_unique<RunLog>((run.dir / "run.log").string());
    run.log->record({{"event", "start"}, {"command", name}, {"seed", run.geti("seed")}});
    return run;
}

std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out.write(text.data(), std::streamsize(text.size()));
    require(out.good(), ErrCat::io, "cannot write " + path.string());
}

// ---- corpus ---------------------------------------------------------------

void cmd_corpus(Run& run) {
    const int count = int(run.geti("count"));
    const int frames = int(run.geti("frames"));
    const int size = int(run.geti("size"));
    // trajectories are anchored on a 16 px stage; smaller frames cut them off
    require(size >= 16, ErrCat::config, "frame size must be at least 16");
    const uint64_t seed = uint64_t(run.geti("seed"));

    const std::vector<SceneSpec> specs = sample_corpus(count, seed);
    fs::create_directories(run.artifact("clips"));

    std::string index = "file,prompt,motion,speed,start_x,start_y,radius,shape,color,background,bg_color\n";
    for (size_t i = 0; i < specs.size(); ++i) {
        const SceneSpec& s = specs[i];
        const RenderedClip<float> r = render_clip<float>(s, frames, size, size);
        char name[32];
        std::snprintf(name, sizeof name, "clips/clip_%04zu.bin", i);
        save_clip(r.clip, run.artifact(name).string());
        const std::string prompt = detokenize(r.prompt);
        index += std::string(name) + "," + prompt + "," + motion_phrase(s.motion.kind) + "," +
                 csv_num(s.motion.speed) + "," + csv_num(s.motion.start_x) + "," +
                 csv_num(s.motion.start_y) + "," + csv_num(s.motion.radius) + "," +
                 shape_name(s.appearance.shape) + "," + color_name(s.appearance.color) + "," +
                 background_name(s.appearance.background) + "," +
                 color_name(s.appearance.bg_color) + "\n";
        run.log->record({{"event", "clip"}, {"i", i}, {"prompt", prompt}});
    }
    write_text(run.artifact("index.csv"), index);
    run.log->record({{"event", "done"}, {"clips", specs.size()}});
}

// ---- train-base -----------------------------------------------------------

std::vector<LatentClip<float>> load_corpus_clips(const fs::path& corpus_dir) {
    const fs::path clips = corpus_dir / "clips";
    std::error_code ec;
    require(fs::is_directory(clips, ec), ErrCat::io,
            "corpus directory has no clips/: " + corpus_dir.string());
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(clips))
        if (entry.path().extension() == ".bin") paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    require(!paths.empty(), ErrCat::data, "no clips found in " + clips.string());

    std::vector<LatentClip<float>> out;
    out.reserve(paths.size());
    for (const fs::path& p : paths) {
        out.push_back(load_clip(p.string()));
        require(out.back().latent.shape() == out.front().latent.shape(), ErrCat::data,
                "clip shape mismatch: " + p.string());
    }
    return out;
}

void cmd_train_base(Run& run) {
    const auto data = load_corpus_clips(run.gets("corpus"));
    const Shape& s = data.front().latent.shape();

    UNetConfig cfg;
    cfg.frames = int(s[1]);
    cfg.size = int(s[2]);
    require(s[2] == s[3], ErrCat::data, "clips must be square");
    cfg.in_channels = int(s[4]);
    cfg.channels = to_int_list("channels", run.gets("channels"));
    cfg.heads = int(run.geti("heads"));
    cfg.timesteps = int(run.geti("timesteps"));
    cfg.validate();

    BaseTrainConfig tc;
    tc.steps = int(run.geti("steps"));
    tc.batch = int(run.geti("batch"));
    tc.lr = run.getd("lr");
    tc.log_every = int(run.geti("log_every"));
    tc.seed = uint64_t(run.geti("seed"));
    tc.validate();

    Model<float> m = make_model<float>(cfg, tc.seed);
    train_base(m, data, tc, [&](const LossRecord& rec) {
        run.log->record(
            {{"event", "step"}, {"phase", rec.phase}, {"step", rec.step}, {"loss", rec.total}});
    });
    save_checkpoint(m, run.artifact("model.ckpt").string());
    run.log->record({{"event", "done"}, {"params", m.params.size()}});
}

// ---- customize ------------------------------------------------------------

void cmd_customize(Run& run) {
    const Model<float> base = load_checkpoint(run.gets("base"));

    ReferenceClip<float> ref;
    ref.clip = load_clip(run.gets("reference"));
    // the reference names its own motion; reuse the prompt's motion words
    const ParsedPrompt parsed = parse_prompt(ref.clip.prompt);
    ref.motion_desc = motion_tokens(parsed.kind);

    TrainConfig tc;
    tc.steps = int(run.geti("steps"));
    tc.spatial_steps = int(run.geti("spatial_steps"));
    tc.lr = run.getd("lr");
    tc.beta = run.getd("beta");
    tc.log_every = int(run.geti("log_every"));
    tc.seed = uint64_t(run.geti("seed"));
    tc.templates = default_templates();
    tc.validate();

    Model<float> tuned = base;
    tuned.params = customize(base, ref, tc, [&](const LossRecord& rec) {
        run.log->record({{"event", "step"},
                         {"phase", rec.phase},
                         {"step", rec.step},
                         {"temporal", rec.temporal},
                         {"appearance", rec.appearance},
                         {"total", rec.total}});
    });
    save_checkpoint(tuned, run.artifact("model.ckpt").string());
    run.log->record({{"event", "done"}, {"steps", tc.steps}});
}

// ---- generate -------------------------------------------------------------

void export_formats(const LatentClip<float>& clip, const Run& run, const std::string& key) {
    const std::string fmt = run.gets(key);
    require(fmt == "png" || fmt == "gif" || fmt == "both" || fmt == "none", ErrCat::config,
            "key '" + key + "' wants png, gif, both, or none");
    if (fmt == "png" || fmt == "both")
        export_clip(clip, run.artifact("clip.png").string(), ExportFormat::png_grid);
    if (fmt == "gif" || fmt == "both")
        export_clip(clip, run.artifact("clip.gif").string(), ExportFormat::gif);
}

void cmd_generate(Run& run) {
    const Model<float> m = load_checkpoint(run.gets("model"));
    const TokenSeq prompt = tokenize(run.gets("prompt"));
    const int steps = int(run.geti("steps"));
    const double eta = run.getd("eta");
    const uint64_t seed = uint64_t(run.geti("seed"));

    const Shape shape = {1, int64_t(m.config.frames), int64_t(m.config.size),
                         int64_t(m.config.size), int64_t(m.config.in_channels)};
    LatentClip<float> clip = ddim_sample(m, prompt, steps, eta, seed, shape);
    save_clip(clip, run.artifact("clip.bin").string());
    export_formats(clip, run, "export");
    run.log->record({{"event", "sample"}, {"steps", steps}, {"prompt", run.gets("prompt")}});
    run.log->record({{"event", "done"}});
}

// ---- evaluate -------------------------------------------------------------

void cmd_evaluate(Run& run) {
    const Model<float> m = load_checkpoint(run.gets("model"));
    const int n_basic = int(run.geti("n_basic"));
    const int n_complex = int(run.geti("n_complex"));

    std::vector<EvalCase> cases;
    for (int k = 0; k < kMotionKinds; ++k) {
        const MotionFactor motion = default_motion(MotionKind(k));
        for (ProtocolEntry& e : eval_protocol(MotionKind(k), canonical_reference(), n_basic, n_complex))
            cases.push_back({motion, std::move(e)});
    }

    SampleConfig sc;
    sc.steps = int(run.geti("steps"));
    sc.eta = run.getd("eta");
    sc.seed = uint64_t(run.geti("seed"));
    const MetricReport rep = run_report(m, cases, sc);

    write_text(run.artifact("metrics.csv"), to_csv(rep));
    for (const ReportRow& r : rep.rows)
        run.log->record({{"event", "row"},
                         {"clip", r.clip_id},
                         {"prompt", r.prompt},
                         {"appearance", r.appearance_match},
                         {"temporal", r.temporal_consistency},
                         {"motion", r.motion_fidelity},
                         {"trackable", r.trackable},
                         {"failed", r.failed}});
    run.log->record({{"event", "summary"},
                     {"appearance", rep.mean_appearance},
                     {"temporal", rep.mean_temporal},
                     {"motion", rep.mean_motion},
                     {"failed_rows", rep.failed_rows}});
    require(rep.failed_rows == 0, ErrCat::partial,
            std::to_string(rep.failed_rows) + " of " + std::to_string(rep.rows.size()) +
                " evaluation rows failed; see " + run.artifact("metrics.csv").string());
}

// ---- export ---------------------------------------------------------------

void cmd_export(Run& run) {
    const LatentClip<float> clip = load_clip(run.gets("clip"));
    export_formats(clip, run, "format");
    run.log->record({{"event", "done"}, {"frames", clip.latent.dim(1)}});
}

} // namespace

void run_command(const std::string& name, const std::map<std::string, std::string>& overrides) {
    const CommandDef& def = lookup(name);
    Run run = open_run(name, merge_config(def, command_keys(name), overrides));
    if (name == "corpus") cmd_corpus(run);
    else if (name == "train-base") cmd_train_base(run);
    else if (name == "customize") cmd_customize(run);
    else if (name == "generate") cmd_generate(run);
    else if (name == "evaluate") cmd_evaluate(run);
    else cmd_export(run);
}

std::vector<std::string> command_names() {
    std::vector<std::string> names;
    for (const auto& [name, def] : command_table()) {
        (void)def;
        names.push_back(name);
    }
    return names;
}

std::set<std::string> command_keys(const std::string& name) {
    const CommandDef& def = lookup(name);
    std::set<std::string> keys = kCommonKeys;
    for (const auto& [k, v] : def.defaults) {
        (void)v;
        keys.insert(k);
    }
    keys.insert(def.required.begin(), def.required.end());
    return keys;
}

} // namespace motionlab
