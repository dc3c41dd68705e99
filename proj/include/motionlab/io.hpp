#pragma once
// Persistence and export: checkpoint files carrying a full model, raw
// tensor clip files, PNG/GIF visual export, JSON-lines run logs, and
// plain-text key-value config files.

#include <cstdio>
#include <map>
#include <set>
#include <string>

#include "json.hpp"
#include "motionlab/unet.hpp"

namespace motionlab {

// Checkpoint layout: magic + format version, model configuration, noise
// schedule parameters, a parameter manifest (name, branch tag, shape,
// payload offset), the concatenated little-endian float32 payload, and a
// trailing digest over the payload bytes. Offsets are assigned in manifest
// order and must tile the payload exactly.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model<float>& m, const std::string& path);

// Verifies magic, version, manifest arithmetic, and the payload digest.
// A damaged or truncated file raises a corruption error; an unknown
// format version raises a version error.
Model<float> load_checkpoint(const std::string& path);

// Raw clip files: shape, prompt tokens, float32 payload, digest.
inline constexpr uint32_t kClipVersion = 1;

void save_clip(const LatentClip<float>& clip, const std::string& path);
LatentClip<float> load_clip(const std::string& path);

enum class ExportFormat {
    png_grid, // frames side by side, left to right, one image
    gif,      // animated, nominal 8 fps on the 10 ms GIF tick grid
};

// Values map [-1,1] -> [0,255] with clamping at both ends.
void export_clip(const LatentClip<float>& clip, const std::string& path, ExportFormat fmt);

// Append-only JSON-lines log; one self-contained record per line, flushed
// as written so partial runs stay inspectable.
class RunLog {
public:
    explicit RunLog(const std::string& path);
    ~RunLog();
    RunLog(const RunLog&) = delete;
    RunLog& operator=(const RunLog&) = delete;

    void record(const nlohmann::json& rec);
    const std::string& path() const { return path_; }

private:
    std::FILE* f_ = nullptr;
    std::string path_;
};

// `key = value` lines, '#' comments. Keys outside `allowed` and duplicate
// keys are rejected so a typo cannot silently become a default.
std::map<std::string, std::string> read_config_file(const std::string& path,
                                                    const std::set<std::string>& allowed);

} // namespace motionlab
