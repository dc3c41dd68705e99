#pragma once
// Procedural clip generator with independently controlled motion and
// appearance factors. Every clip is fully determined by its SceneSpec:
// trajectories are analytic (exact per-frame centroids), rendering is
// deterministic, and prompts parse back to the factors that produced them.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "motionlab/customize.hpp"

namespace motionlab {

enum class MotionKind : int {
    translate_right = 0,
    translate_up,
    bounce,
    circular,
    grow,
    shrink,
    camera_pan,
    shake,
};
inline constexpr int kMotionKinds = 8;

enum class ObjectShape : int { square = 0, circle, triangle, cross };
inline constexpr int kShapes = 4;

enum class Background : int { plain = 0, gradient, checker };
inline constexpr int kBackgrounds = 3;

inline constexpr int kPaletteSize = 8;

// foreground/background pairs must differ by at least this much in some
// channel to stay distinguishable after anti-aliasing
inline constexpr double kMinChannelDistance = 0.25;

namespace corpus_detail {
inline constexpr double kBounceSpan = 6.0;  // vertical travel of a bounce
inline constexpr double kOrbitRadius = 3.5; // circular motion orbit
inline constexpr double kShakePeriod = 4.0; // frames per shake cycle
inline constexpr double kVanishRadius = 0.5;
inline constexpr int kCheckerCell = 4;
} // namespace corpus_detail

// colors live in the renderer's [-1,1] value range
inline const std::array<std::array<float, 3>, kPaletteSize>& palette() {
    static const std::array<std::array<float, 3>, kPaletteSize> p = {{
        {0.9f, -0.7f, -0.7f}, // red
        {-0.7f, 0.9f, -0.7f}, // green
        {-0.7f, -0.7f, 0.9f}, // blue
        {0.9f, 0.9f, -0.7f},  // yellow
        {0.9f, -0.7f, 0.9f},  // magenta
        {-0.7f, 0.9f, 0.9f},  // cyan
        {0.9f, 0.1f, -0.7f},  // orange
        {0.0f, 0.0f, 0.0f},   // gray
    }};
    return p;
}

inline const char* color_name(int i) {
    static const char* names[kPaletteSize] = {"red",     "green", "blue",   "yellow",
                                              "magenta", "cyan",  "orange", "gray"};
    require(i >= 0 && i < kPaletteSize, ErrCat::domain, "color index out of range");
    return names[i];
}

inline const char* shape_name(ObjectShape s) {
    static const char* names[kShapes] = {"square", "circle", "triangle", "cross"};
    const int i = int(s);
    require(i >= 0 && i < kShapes, ErrCat::domain, "shape out of range");
    return names[i];
}

inline const char* background_name(Background b) {
    static const char* names[kBackgrounds] = {"plain", "gradient", "checker"};
    const int i = int(b);
    require(i >= 0 && i < kBackgrounds, ErrCat::domain, "background out of range");
    return names[i];
}

inline const char* motion_phrase(MotionKind k) {
    static const char* phrases[kMotionKinds] = {"sliding right", "rising up", "bouncing",
                                               "circling",      "growing",   "shrinking",
                                               "panning",       "shaking"};
    const int i = int(k);
    require(i >= 0 && i < kMotionKinds, ErrCat::domain, "motion kind out of range");
    return phrases[i];
}

// largest per-channel separation between two palette entries
inline double channel_distance(int a, int b) {
    const auto& pa = palette().at(size_t(a));
    const auto& pb = palette().at(size_t(b));
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(double(pa[size_t(c)]) - double(pb[size_t(c)])));
    return d;
}

// speed is pixels/frame for positional kinds, radians/frame for circular,
// and radius pixels/frame for grow/shrink; start anchors the trajectory
// (the orbit center for circular motion) and radius sets the object size
struct MotionFactor {
    MotionKind kind = MotionKind::translate_right;
    double speed = 1.0;
    double start_x = 8.0;
    double start_y = 8.0;
    double radius = 2.5;
};

// canonical anchor/speed per kind, chosen so every trajectory stays inside
// a 16x16 frame for 8 frames with margin to spare
inline MotionFactor default_motion(MotionKind kind) {
    switch (kind) {
    case MotionKind::translate_right: return {kind, 1.0, 3.0, 8.0, 2.5};
    case MotionKind::translate_up: return {kind, 1.0, 8.0, 12.0, 2.5};
    case MotionKind::bounce: return {kind, 2.0, 8.0, 11.0, 2.5};
    case MotionKind::circular: return {kind, std::numbers::pi / 4.0, 8.0, 8.0, 2.5};
    case MotionKind::grow: return {kind, 0.35, 8.0, 8.0, 1.5};
    case MotionKind::shrink: return {kind, 0.35, 8.0, 8.0, 3.5};
    case MotionKind::camera_pan: return {kind, 1.0, 11.0, 8.0, 2.5};
    case MotionKind::shake: return {kind, 1.5, 8.0, 8.0, 2.5};
    }
    fail(ErrCat::domain, "motion kind out of range");
}

// color fields index the shared palette
struct AppearanceFactor {
    ObjectShape shape = ObjectShape::square;
    int color = 0;
    Background background = Background::plain;
    int bg_color = 7;
};

inline AppearanceFactor canonical_reference() { return AppearanceFactor{}; }

struct SceneSpec {
    MotionFactor motion;
    AppearanceFactor appearance;
    uint64_t seed = 0;
};

inline void validate_motion(const MotionFactor& m) {
    const int k = int(m.kind);
    require(k >= 0 && k < kMotionKinds, ErrCat::domain, "motion kind out of range");
    require(std::isfinite(m.speed) && m.speed >= 0.0, ErrCat::domain,
            "motion speed must be finite and non-negative");
    require(std::isfinite(m.start_x) && std::isfinite(m.start_y), ErrCat::domain,
            "motion start must be finite");
    require(std::isfinite(m.radius) && m.radius > 0.0, ErrCat::domain,
            "object radius must be positive");
}

inline void validate_appearance(const AppearanceFactor& a) {
    const int s = int(a.shape), b = int(a.background);
    require(s >= 0 && s < kShapes, ErrCat::domain, "shape out of range");
    require(b >= 0 && b < kBackgrounds, ErrCat::domain, "background out of range");
    require(a.color >= 0 && a.color < kPaletteSize, ErrCat::domain, "color index out of range");
    require(a.bg_color >= 0 && a.bg_color < kPaletteSize, ErrCat::domain,
            "background color index out of range");
    require(channel_distance(a.color, a.bg_color) >= kMinChannelDistance, ErrCat::domain,
            "foreground and background colors are too close");
}

// exact object centroid per frame
inline std::vector<std::array<double, 2>> trajectory(const MotionFactor& m, int frames) {
    validate_motion(m);
    require(frames > 0, ErrCat::domain, "frame count must be positive");
    std::vector<std::array<double, 2>> out;
    out.reserve(size_t(frames));
    using corpus_detail::kBounceSpan;
    using corpus_detail::kOrbitRadius;
    using corpus_detail::kShakePeriod;
    for (int f = 0; f < frames; ++f) {
        double x = m.start_x, y = m.start_y;
        switch (m.kind) {
        case MotionKind::translate_right: x += m.speed * f; break;
        case MotionKind::translate_up: y -= m.speed * f; break;
        case MotionKind::bounce: {
            // triangle wave: rises from the start, reflects after kBounceSpan
            const double p = std::fmod(m.speed * double(f), 2.0 * kBounceSpan);
            y -= (p <= kBounceSpan) ? p : 2.0 * kBounceSpan - p;
            break;
        }
        case MotionKind::circular:
            x += kOrbitRadius * std::cos(m.speed * double(f));
            y += kOrbitRadius * std::sin(m.speed * double(f));
            break;
        case MotionKind::grow:
        case MotionKind::shrink: break; // radius changes, centroid does not
        case MotionKind::camera_pan: x -= m.speed * f; break; // camera right, scene left
        case MotionKind::shake:
            x += m.speed * std::sin(2.0 * std::numbers::pi * double(f) / kShakePeriod);
            break;
        }
        out.push_back({x, y});
    }
    return out;
}

// object radius per frame; only grow/shrink vary it
inline std::vector<double> radii(const MotionFactor& m, int frames) {
    validate_motion(m);
    require(frames > 0, ErrCat::domain, "frame count must be positive");
    std::vector<double> out;
    out.reserve(size_t(frames));
    for (int f = 0; f < frames; ++f) {
        double r = m.radius;
        if (m.kind == MotionKind::grow) r += m.speed * f;
        if (m.kind == MotionKind::shrink) r -= m.speed * f;
        out.push_back(r);
    }
    return out;
}

// ---- vocabulary -----------------------------------------------------------

// id 0 is the pad token; the table is fixed and shared with the model
inline const std::vector<std::string>& vocabulary() {
    static const std::vector<std::string> words = {
        "<pad>",
        // structure
        "a", "is", "on", "background",
        // colors
        "red", "green", "blue", "yellow", "magenta", "cyan", "orange", "gray",
        // shapes
        "square", "circle", "triangle", "cross",
        // motion words
        "sliding", "right", "rising", "up", "bouncing", "circling", "growing",
        "shrinking", "panning", "shaking",
        // backgrounds
        "plain", "gradient", "checker",
    };
    return words;
}

inline int32_t word_id(const std::string& word) {
    const auto& v = vocabulary();
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] == word) return int32_t(i);
    fail(ErrCat::input, "unknown word: " + word);
}

inline TokenSeq tokenize(const std::string& text) {
    TokenSeq seq;
    std::string word;
    for (size_t i = 0; i <= text.size(); ++i) {
        if (i < text.size() && text[i] != ' ') {
            word.push_back(text[i]);
            continue;
        }
        if (!word.empty()) seq.ids.push_back(word_id(word));
        word.clear();
    }
    return seq;
}

inline std::string detokenize(const TokenSeq& seq) {
    const auto& v = vocabulary();
    std::string out;
    for (int32_t id : seq.ids) {
        require(id >= 0 && size_t(id) < v.size(), ErrCat::input, "token id out of range");
        if (!out.empty()) out += ' ';
        out += v[size_t(id)];
    }
    return out;
}

inline TokenSeq motion_tokens(MotionKind k) { return tokenize(motion_phrase(k)); }

// "a {color} {shape} is {motion phrase} on a {bg color} {background} background"
inline TokenSeq prompt_for(const AppearanceFactor& a, MotionKind kind) {
    validate_appearance(a);
    std::string text = std::string("a ") + color_name(a.color) + " " + shape_name(a.shape) +
                       " is " + motion_phrase(kind) + " on a " + color_name(a.bg_color) + " " +
                       background_name(a.background) + " background";
    return tokenize(text);
}

struct ParsedPrompt {
    MotionKind kind;
    AppearanceFactor appearance;
};

// strict inverse of prompt_for; trailing pad tokens are ignored
inline ParsedPrompt parse_prompt(const TokenSeq& prompt) {
    const auto& v = vocabulary();
    std::vector<std::string> words;
    size_t end = prompt.ids.size();
    while (end > 0 && prompt.ids[end - 1] == kPadToken) --end;
    for (size_t i = 0; i < end; ++i) {
        const int32_t id = prompt.ids[i];
        require(id > 0 && size_t(id) < v.size(), ErrCat::input, "token id out of range");
        words.push_back(v[size_t(id)]);
    }
    size_t pos = 0;
    auto expect = [&](const std::string& w) {
        require(pos < words.size() && words[pos] == w, ErrCat::input,
                "malformed prompt: expected '" + w + "'");
        ++pos;
    };
    auto take = [&](const char* what) -> std::string {
        require(pos < words.size(), ErrCat::input,
                std::string("malformed prompt: missing ") + what);
        return words[pos++];
    };
    auto find_color = [&](const std::string& w) {
        for (int i = 0; i < kPaletteSize; ++i)
            if (w == color_name(i)) return i;
        fail(ErrCat::input, "malformed prompt: unknown color '" + w + "'");
    };

    ParsedPrompt out;
    expect("a");
    out.appearance.color = find_color(take("color"));
    {
        const std::string w = take("shape");
        int s = -1;
        for (int i = 0; i < kShapes; ++i)
            if (w == shape_name(ObjectShape(i))) s = i;
        require(s >= 0, ErrCat::input, "malformed prompt: unknown shape '" + w + "'");
        out.appearance.shape = ObjectShape(s);
    }
    expect("is");
    {
        int k = -1;
        for (int i = 0; i < kMotionKinds; ++i) {
            const TokenSeq mt = motion_tokens(MotionKind(i));
            const size_t len = mt.ids.size();
            if (pos + len > end) continue;
            bool match = true;
            for (size_t j = 0; j < len; ++j)
                if (prompt.ids[pos + j] != mt.ids[j]) match = false;
            if (match && (k < 0 || len > motion_tokens(MotionKind(k)).ids.size())) k = i;
        }
        require(k >= 0, ErrCat::input, "malformed prompt: unknown motion phrase");
        out.kind = MotionKind(k);
        pos += motion_tokens(out.kind).ids.size();
    }
    expect("on");
    expect("a");
    out.appearance.bg_color = find_color(take("background color"));
    {
        const std::string w = take("background");
        int b = -1;
        for (int i = 0; i < kBackgrounds; ++i)
            if (w == background_name(Background(i))) b = i;
        require(b >= 0, ErrCat::input, "malformed prompt: unknown background '" + w + "'");
        out.appearance.background = Background(b);
    }
    expect("background");
    require(pos == words.size(), ErrCat::input, "malformed prompt: trailing words");
    validate_appearance(out.appearance);
    return out;
}

// ---- rendering ------------------------------------------------------------

namespace corpus_detail {

inline bool inside_shape(ObjectShape shape, double dx, double dy, double r) {
    switch (shape) {
    case ObjectShape::square: return std::abs(dx) <= r && std::abs(dy) <= r;
    case ObjectShape::circle: return dx * dx + dy * dy <= r * r;
    case ObjectShape::triangle: {
        // vertices (0,-r), (+-0.866r, 0.5r); centroid at the origin
        const double x0 = 0.0, y0 = -r;
        const double x1 = -0.866 * r, y1 = 0.5 * r;
        const double x2 = 0.866 * r, y2 = 0.5 * r;
        auto edge = [&](double ax, double ay, double bx, double by) {
            return (bx - ax) * (dy - ay) - (by - ay) * (dx - ax);
        };
        const double e0 = edge(x0, y0, x1, y1);
        const double e1 = edge(x1, y1, x2, y2);
        const double e2 = edge(x2, y2, x0, y0);
        return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
    case ObjectShape::cross:
        return (std::abs(dx) <= r / 3.0 && std::abs(dy) <= r) ||
               (std::abs(dy) <= r / 3.0 && std::abs(dx) <= r);
    }
    fail(ErrCat::domain, "shape out of range");
}

inline std::array<float, 3> lighten(const std::array<float, 3>& c) {
    std::array<float, 3> out;
    for (int i = 0; i < 3; ++i) out[size_t(i)] = c[size_t(i)] + 0.4f * (1.0f - c[size_t(i)]);
    return out;
}

inline std::array<float, 3> background_value(const AppearanceFactor& a, int x, int y, int height,
                                             double pan) {
    const auto& bgc = palette().at(size_t(a.bg_color));
    switch (a.background) {
    case Background::plain: return bgc;
    case Background::gradient: {
        // vertical blend toward a lighter shade
        const auto top = bgc;
        const auto bottom = lighten(bgc);
        const float w = height > 1 ? float(y) / float(height - 1) : 0.0f;
        std::array<float, 3> out;
        for (int i = 0; i < 3; ++i)
            out[size_t(i)] = top[size_t(i)] + w * (bottom[size_t(i)] - top[size_t(i)]);
        return out;
    }
    case Background::checker: {
        // the pattern lives in world coordinates, so a camera pan slides it
        const double u = double(x) + pan;
        const auto cell = int64_t(std::floor(u / double(kCheckerCell))) +
                          int64_t(std::floor(double(y) / double(kCheckerCell)));
        const bool odd = ((cell % 2) + 2) % 2 == 1;
        return odd ? lighten(bgc) : bgc;
    }
    }
    fail(ErrCat::domain, "background out of range");
}

} // namespace corpus_detail

template <class S = float>
struct RenderedClip {
    LatentClip<S> clip;
    TokenSeq prompt;
    std::vector<std::array<double, 2>> trajectory; // exact centroid per frame
};

// Rasterizes the spec at 2x2 supersampling. All values land in [-1,1];
// fully covered pixels carry the exact foreground color.
template <class S = float>
RenderedClip<S> render_clip(const SceneSpec& spec, int frames, int height, int width) {
    validate_motion(spec.motion);
    validate_appearance(spec.appearance);
    require(frames > 0 && height > 0 && width > 0, ErrCat::domain,
            "frame geometry must be positive");

    const auto traj = trajectory(spec.motion, frames);
    const auto rads = radii(spec.motion, frames);
    for (int f = 0; f < frames; ++f) {
        const auto [cx, cy] = traj[size_t(f)];
        const double r = rads[size_t(f)];
        require(r >= corpus_detail::kVanishRadius, ErrCat::render,
                "object vanishes at frame " + std::to_string(f));
        const bool fits = cx - r >= -0.5 && cx + r <= double(width) - 0.5 && cy - r >= -0.5 &&
                          cy + r <= double(height) - 0.5;
        require(fits, ErrCat::render, "object exits the frame at frame " + std::to_string(f));
    }

    const auto& fg = palette().at(size_t(spec.appearance.color));
    RenderedClip<S> out;
    out.trajectory = traj;
    out.prompt = prompt_for(spec.appearance, spec.motion.kind);
    out.clip.prompt = out.prompt;
    out.clip.latent = Tensor<S>::zeros({1, int64_t(frames), int64_t(height), int64_t(width), 3});
    S* dst = out.clip.latent.data();

    static const double offs[2] = {-0.25, 0.25};
    for (int f = 0; f < frames; ++f) {
        const auto [cx, cy] = traj[size_t(f)];
        const double r = rads[size_t(f)];
        const double pan =
            spec.motion.kind == MotionKind::camera_pan ? spec.motion.speed * double(f) : 0.0;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                int cov = 0;
                for (double oy : offs)
                    for (double ox : offs)
                        if (corpus_detail::inside_shape(spec.appearance.shape,
                                                        double(x) + ox - cx, double(y) + oy - cy,
                                                        r))
                            ++cov;
                const auto bg =
                    corpus_detail::background_value(spec.appearance, x, y, height, pan);
                S* px = dst + ((size_t(f) * size_t(height) + size_t(y)) * size_t(width) +
                               size_t(x)) * 3;
                for (int c = 0; c < 3; ++c) {
                    // exact colors at full or zero coverage keep interior
                    // pixels bit-equal to the palette
                    const float b = bg[size_t(c)], g = fg[size_t(c)];
                    if (cov == 4) px[c] = S(g);
                    else if (cov == 0) px[c] = S(b);
                    else px[c] = S(b + 0.25f * float(cov) * (g - b));
                }
            }
        }
    }
    return out;
}

// ---- corpus sampling ------------------------------------------------------

// all categorical combinations with a usable foreground/background pair
inline int64_t factor_grid_size() {
    int64_t pairs = 0;
    for (int c = 0; c < kPaletteSize; ++c)
        for (int bc = 0; bc < kPaletteSize; ++bc)
            if (channel_distance(c, bc) >= kMinChannelDistance) ++pairs;
    return int64_t(kMotionKinds) * kShapes * kBackgrounds * pairs;
}

// uniform over the factor grid: a seeded shuffle covers the grid without
// replacement, then further draws fall back to with-replacement sampling;
// start anchors get a small seeded jitter that stays within the default
// frame bounds
inline std::vector<SceneSpec> sample_corpus(int64_t n, uint64_t seed) {
    require(n > 0, ErrCat::config, "corpus size must be positive");
    struct Combo {
        int kind, shape, color, background, bg_color;
    };
    std::vector<Combo> grid;
    for (int k = 0; k < kMotionKinds; ++k)
        for (int s = 0; s < kShapes; ++s)
            for (int b = 0; b < kBackgrounds; ++b)
                for (int c = 0; c < kPaletteSize; ++c)
                    for (int bc = 0; bc < kPaletteSize; ++bc)
                        if (channel_distance(c, bc) >= kMinChannelDistance)
                            grid.push_back({k, s, c, b, bc});

    Rng rng(seed);
    for (size_t i = grid.size(); i > 1; --i) {
        const size_t j = size_t(rng.uniform_int(int64_t(i)));
        std::swap(grid[i - 1], grid[j]);
    }

    std::vector<SceneSpec> out;
    out.reserve(size_t(n));
    for (int64_t i = 0; i < n; ++i) {
        const Combo& g = i < int64_t(grid.size())
                             ? grid[size_t(i)]
                             : grid[size_t(rng.uniform_int(int64_t(grid.size())))];
        SceneSpec spec;
        spec.seed = Rng::derive(seed, uint64_t(i));
        spec.motion = default_motion(MotionKind(g.kind));
        Rng jitter(spec.seed);
        spec.motion.start_x += jitter.uniform(-0.75, 0.75);
        spec.motion.start_y += jitter.uniform(-0.75, 0.75);
        spec.appearance.shape = ObjectShape(g.shape);
        spec.appearance.color = g.color;
        spec.appearance.background = Background(g.background);
        spec.appearance.bg_color = g.bg_color;
        out.push_back(spec);
    }
    return out;
}

// ---- evaluation protocol --------------------------------------------------

struct ProtocolEntry {
    TokenSeq prompt;
    AppearanceFactor target;
};

namespace corpus_detail {

// next palette index after `from` (stepping `shift`) that keeps a usable
// distance to `paired`
inline int shifted_color(int from, int shift, int paired) {
    int c = from;
    for (int tries = 0; tries < kPaletteSize; ++tries) {
        c = (c + shift) % kPaletteSize;
        if (c != from && channel_distance(c, paired) >= kMinChannelDistance) return c;
        shift = 1;
    }
    fail(ErrCat::internal, "no usable palette color found");
}

} // namespace corpus_detail

// Prompts that request appearances the reference never had: the basic ones
// change exactly one factor, the complex ones change the object and the
// background together. Each prompt is paired with the appearance it asks
// for, so generated clips can be scored against ground truth.
inline std::vector<ProtocolEntry> eval_protocol(MotionKind kind,
                                                const AppearanceFactor& reference =
                                                    canonical_reference(),
                                                int n_basic = 3, int n_complex = 3) {
    require(int(kind) >= 0 && int(kind) < kMotionKinds, ErrCat::domain,
            "motion kind out of range");
    require(n_basic >= 0 && n_complex >= 0, ErrCat::domain,
            "prompt counts must be non-negative");
    validate_appearance(reference);

    std::vector<ProtocolEntry> out;
    out.reserve(size_t(n_basic + n_complex));
    for (int i = 0; i < n_basic; ++i) {
        const int shift = i / 3 + 1;
        AppearanceFactor t = reference;
        switch (i % 3) {
        case 0: t.color = corpus_detail::shifted_color(t.color, shift, t.bg_color); break;
        case 1: t.shape = ObjectShape((int(t.shape) + shift) % kShapes); break;
        case 2: t.background = Background((int(t.background) + shift) % kBackgrounds); break;
        }
        out.push_back({prompt_for(t, kind), t});
    }
    for (int i = 0; i < n_complex; ++i) {
        const int shift = i / 3 + 1;
        AppearanceFactor t = reference;
        switch (i % 3) {
        case 0:
            t.color = corpus_detail::shifted_color(t.color, shift, t.bg_color);
            t.bg_color = corpus_detail::shifted_color(t.bg_color, shift, t.color);
            break;
        case 1:
            t.shape = ObjectShape((int(t.shape) + shift) % kShapes);
            t.background = Background((int(t.background) + shift) % kBackgrounds);
            break;
        default:
            t.color = corpus_detail::shifted_color(t.color, shift + 1, t.bg_color);
            t.shape = ObjectShape((int(t.shape) + shift) % kShapes);
            t.background = Background((int(t.background) + shift) % kBackgrounds);
            t.bg_color = corpus_detail::shifted_color(t.bg_color, shift + 1, t.color);
            break;
        }
        out.push_back({prompt_for(t, kind), t});
    }
    return out;
}

// built-in appearance templates for prompt enhancement: diverse scenes with
// a slot where the motion phrase goes
inline std::vector<PromptTemplate> default_templates() {
    static const std::array<AppearanceFactor, 8> scenes = {{
        {ObjectShape::circle, 1, Background::gradient, 7},
        {ObjectShape::triangle, 2, Background::checker, 3},
        {ObjectShape::cross, 3, Background::plain, 2},
        {ObjectShape::square, 4, Background::gradient, 1},
        {ObjectShape::circle, 5, Background::checker, 0},
        {ObjectShape::triangle, 6, Background::plain, 5},
        {ObjectShape::cross, 7, Background::gradient, 6},
        {ObjectShape::square, 2, Background::checker, 4},
    }};
    std::vector<PromptTemplate> out;
    out.reserve(scenes.size());
    for (const auto& a : scenes) {
        validate_appearance(a);
        PromptTemplate t;
        t.prefix = tokenize(std::string("a ") + color_name(a.color) + " " +
                            shape_name(a.shape) + " is");
        t.suffix = tokenize(std::string("on a ") + color_name(a.bg_color) + " " +
                            background_name(a.background) + " background");
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace motionlab
