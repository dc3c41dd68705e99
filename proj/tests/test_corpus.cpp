#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "motionlab/corpus.hpp"

using namespace motionlab;

namespace {

using TF = Tensor<float>;

SceneSpec spec_of(MotionKind kind, const AppearanceFactor& a, uint64_t seed = 0) {
    SceneSpec s;
    s.motion = default_motion(kind);
    s.appearance = a;
    s.seed = seed;
    return s;
}

bool same_values(const TF& a, const TF& b) {
    return a.shape() == b.shape() && std::equal(a.vec().begin(), a.vec().end(), b.vec().begin());
}

std::tuple<int, int, int, int, int> key_of(const SceneSpec& s) {
    return {int(s.motion.kind), int(s.appearance.shape), s.appearance.color,
            int(s.appearance.background), s.appearance.bg_color};
}

} // namespace

TEST_CASE("vocabulary is dense, distinct, and fits the model token table") {
    const auto& v = vocabulary();
    REQUIRE(v.size() >= 2);
    CHECK(v[0] == "<pad>");
    CHECK(int64_t(v.size()) <= UNetConfig{}.vocab);

    std::set<std::string> seen(v.begin(), v.end());
    CHECK(seen.size() == v.size());

    for (size_t i = 1; i < v.size(); ++i) CHECK(word_id(v[i]) == int32_t(i));

    TokenSeq seq = tokenize("a red square is bouncing");
    CHECK(detokenize(seq) == "a red square is bouncing");
    CHECK_THROWS_AS(tokenize("a purple square"), Error);
    try {
        word_id("purple");
        FAIL("expected an input error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrCat::input);
    }
}

TEST_CASE("prompts round-trip to the factors that produced them") {
    int combos = 0;
    for (int k = 0; k < kMotionKinds; ++k)
        for (int s = 0; s < kShapes; ++s)
            for (int b = 0; b < kBackgrounds; ++b)
                for (int c = 0; c < kPaletteSize; ++c)
                    for (int bc = 0; bc < kPaletteSize; ++bc) {
                        if (channel_distance(c, bc) < kMinChannelDistance) continue;
                        AppearanceFactor a{ObjectShape(s), c, Background(b), bc};
                        const ParsedPrompt parsed = parse_prompt(prompt_for(a, MotionKind(k)));
                        REQUIRE(int(parsed.kind) == k);
                        REQUIRE(int(parsed.appearance.shape) == s);
                        REQUIRE(parsed.appearance.color == c);
                        REQUIRE(int(parsed.appearance.background) == b);
                        REQUIRE(parsed.appearance.bg_color == bc);
                        ++combos;
                    }
    CHECK(combos == factor_grid_size());

    // malformed prompts are rejected, not misread
    TokenSeq good = prompt_for(canonical_reference(), MotionKind::bounce);
    TokenSeq shuffled = good;
    std::reverse(shuffled.ids.begin(), shuffled.ids.end());
    try {
        parse_prompt(shuffled);
        FAIL("expected an input error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrCat::input);
    }
    TokenSeq extra = good;
    extra.ids.push_back(word_id("red"));
    CHECK_THROWS_AS(parse_prompt(extra), Error);

    // trailing pads are ignored
    TokenSeq padded = good;
    padded.ids.push_back(kPadToken);
    padded.ids.push_back(kPadToken);
    CHECK(parse_prompt(padded).appearance.color == canonical_reference().color);
}

TEST_CASE("rendering is deterministic and range-bounded") {
    for (int k = 0; k < kMotionKinds; ++k) {
        AppearanceFactor a{ObjectShape(k % kShapes), k % kPaletteSize, Background(k % kBackgrounds),
                           (k + 3) % kPaletteSize};
        if (channel_distance(a.color, a.bg_color) < kMinChannelDistance)
            a.bg_color = (a.bg_color + 1) % kPaletteSize;
        const SceneSpec spec = spec_of(MotionKind(k), a);
        const RenderedClip<float> r1 = render_clip<float>(spec, 8, 16, 16);
        const RenderedClip<float> r2 = render_clip<float>(spec, 8, 16, 16);
        CHECK(same_values(r1.clip.latent, r2.clip.latent));
        CHECK(r1.prompt == r2.prompt);
        REQUIRE(r1.trajectory.size() == 8);

        for (float v : r1.clip.latent.vec()) {
            REQUIRE(std::isfinite(v));
            REQUIRE(v >= -1.0f);
            REQUIRE(v <= 1.0f);
        }
        CHECK(parse_prompt(r1.prompt).kind == MotionKind(k));
    }
}

TEST_CASE("zero speed degenerates to a static clip") {
    SceneSpec spec = spec_of(MotionKind::translate_right, canonical_reference());
    spec.motion.speed = 0.0;
    const RenderedClip<float> r = render_clip<float>(spec, 6, 16, 16);

    for (const auto& c : r.trajectory) {
        CHECK(c[0] == r.trajectory[0][0]);
        CHECK(c[1] == r.trajectory[0][1]);
    }
    const int64_t frame = 16 * 16 * 3;
    for (int f = 1; f < 6; ++f)
        CHECK(std::equal(r.clip.latent.vec().begin(), r.clip.latent.vec().begin() + frame,
                         r.clip.latent.vec().begin() + f * frame));
}

TEST_CASE("translation centroids follow an arithmetic progression") {
    SceneSpec spec = spec_of(MotionKind::translate_right, canonical_reference());
    spec.motion.speed = 2.0;
    spec.motion.start_x = 3.0;
    const RenderedClip<float> r = render_clip<float>(spec, 6, 16, 16);
    for (int f = 0; f < 6; ++f) {
        CHECK(r.trajectory[size_t(f)][0] == 3.0 + 2.0 * f);
        CHECK(r.trajectory[size_t(f)][1] == spec.motion.start_y);
    }

    // two more frames would carry the object past the right edge
    try {
        render_clip<float>(spec, 8, 16, 16);
        FAIL("expected a render error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrCat::render);
        CHECK(std::string(e.what()).find("exits") != std::string::npos);
    }
}

TEST_CASE("appearance leaves the trajectory alone and motion keeps the colors") {
    // same motion, different appearances: exactly equal centroids
    const SceneSpec s1 = spec_of(MotionKind::circular, canonical_reference());
    SceneSpec s2 = s1;
    s2.appearance = AppearanceFactor{ObjectShape::cross, 5, Background::checker, 1};
    const auto r1 = render_clip<float>(s1, 8, 16, 16);
    const auto r2 = render_clip<float>(s2, 8, 16, 16);
    REQUIRE(r1.trajectory.size() == r2.trajectory.size());
    for (size_t f = 0; f < r1.trajectory.size(); ++f) {
        CHECK(r1.trajectory[f][0] == r2.trajectory[f][0]);
        CHECK(r1.trajectory[f][1] == r2.trajectory[f][1]);
    }

    // same appearance, every motion: the pixel at the centroid is the exact
    // foreground color in every frame
    const AppearanceFactor a = canonical_reference();
    const auto& fg = palette().at(size_t(a.color));
    for (int k = 0; k < kMotionKinds; ++k) {
        const SceneSpec spec = spec_of(MotionKind(k), a);
        const auto r = render_clip<float>(spec, 8, 16, 16);
        for (int f = 0; f < 8; ++f) {
            const int cx = int(std::lround(r.trajectory[size_t(f)][0]));
            const int cy = int(std::lround(r.trajectory[size_t(f)][1]));
            const float* px =
                r.clip.latent.data() + ((size_t(f) * 16 + size_t(cy)) * 16 + size_t(cx)) * 3;
            for (int c = 0; c < 3; ++c) CHECK(px[c] == fg[size_t(c)]);
        }
    }
}

TEST_CASE("camera pan moves the background while object translation does not") {
    AppearanceFactor a = canonical_reference();
    a.background = Background::checker;
    a.bg_color = 2;

    // probe a pixel far from the object in both scenes
    auto corner = [](const RenderedClip<float>& r, int f) {
        return r.clip.latent.data()[size_t(f) * 16 * 16 * 3];
    };
    const auto pan = render_clip<float>(spec_of(MotionKind::camera_pan, a), 8, 16, 16);
    CHECK(corner(pan, 0) != corner(pan, 4));

    const auto slide = render_clip<float>(spec_of(MotionKind::translate_right, a), 8, 16, 16);
    for (int f = 1; f < 8; ++f) CHECK(corner(slide, 0) == corner(slide, f));
}

TEST_CASE("corpus sampling covers the grid without replacement") {
    const int64_t grid = factor_grid_size();
    CHECK(grid == int64_t(kMotionKinds) * kShapes * kBackgrounds * (kPaletteSize * (kPaletteSize - 1)));

    const std::vector<SceneSpec> specs = sample_corpus(grid, 31);
    REQUIRE(int64_t(specs.size()) == grid);

    std::set<std::tuple<int, int, int, int, int>> combos;
    std::set<std::pair<int, int>> kind_shape;
    for (const auto& s : specs) {
        combos.insert(key_of(s));
        kind_shape.insert({int(s.motion.kind), int(s.appearance.shape)});
    }
    CHECK(int64_t(combos.size()) == grid);
    CHECK(kind_shape.size() == size_t(kMotionKinds) * kShapes);

    // deterministic per seed, different across seeds
    const std::vector<SceneSpec> again = sample_corpus(grid, 31);
    bool same = true;
    for (size_t i = 0; i < specs.size(); ++i)
        if (key_of(specs[i]) != key_of(again[i])) same = false;
    CHECK(same);
    const std::vector<SceneSpec> other = sample_corpus(grid, 32);
    bool differs = false;
    for (size_t i = 0; i < specs.size(); ++i)
        if (key_of(specs[i]) != key_of(other[i])) differs = true;
    CHECK(differs);

    // past the grid the draws continue with replacement
    const std::vector<SceneSpec> wrapped = sample_corpus(grid + 5, 31);
    REQUIRE(int64_t(wrapped.size()) == grid + 5);
    for (size_t i = 0; i < specs.size(); ++i) CHECK(key_of(wrapped[i]) == key_of(specs[i]));

    CHECK_THROWS_AS(sample_corpus(0, 1), Error);

    // jittered starts still render inside the default frame
    for (size_t i = 0; i < specs.size(); i += 97)
        CHECK_NOTHROW(render_clip<float>(specs[i], 8, 16, 16));
}

TEST_CASE("evaluation protocol emits one target per requested prompt") {
    const AppearanceFactor ref = canonical_reference();
    int total = 0;
    for (int k = 0; k < kMotionKinds; ++k) {
        const auto entries = eval_protocol(MotionKind(k), ref);
        REQUIRE(entries.size() == 6);
        total += int(entries.size());

        for (size_t i = 0; i < entries.size(); ++i) {
            const auto& e = entries[i];
            // every prompt parses back to its own target and motion
            const ParsedPrompt p = parse_prompt(e.prompt);
            CHECK(int(p.kind) == k);
            CHECK(p.appearance.shape == e.target.shape);
            CHECK(p.appearance.color == e.target.color);
            CHECK(p.appearance.background == e.target.background);
            CHECK(p.appearance.bg_color == e.target.bg_color);

            const int object_changed =
                int(e.target.shape != ref.shape) + int(e.target.color != ref.color);
            const int background_changed = int(e.target.background != ref.background) +
                                           int(e.target.bg_color != ref.bg_color);
            if (i < 3) {
                CHECK(object_changed + background_changed == 1);
            } else {
                CHECK(object_changed >= 1);
                CHECK(background_changed >= 1);
            }
        }
    }
    CHECK(total == 48);

    CHECK(eval_protocol(MotionKind::bounce, ref, 5, 2).size() == 7);
    CHECK_THROWS_AS(eval_protocol(MotionKind::bounce, ref, -1, 3), Error);
}

TEST_CASE("factor validation rejects unusable scenes") {
    AppearanceFactor clash = canonical_reference();
    clash.bg_color = clash.color;
    try {
        render_clip<float>(spec_of(MotionKind::bounce, clash), 8, 16, 16);
        FAIL("expected a domain error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrCat::domain);
    }

    AppearanceFactor bad = canonical_reference();
    bad.color = 99;
    CHECK_THROWS_AS(validate_appearance(bad), Error);

    SceneSpec neg = spec_of(MotionKind::grow, canonical_reference());
    neg.motion.speed = -1.0;
    CHECK_THROWS_AS(render_clip<float>(neg, 8, 16, 16), Error);

    // shrinking to nothing is a render failure, not a crash
    SceneSpec gone = spec_of(MotionKind::shrink, canonical_reference());
    gone.motion.speed = 0.5;
    try {
        render_clip<float>(gone, 8, 16, 16);
        FAIL("expected a render error");
    } catch (const Error& e) {
        CHECK(e.category() == ErrCat::render);
        CHECK(std::string(e.what()).find("vanishes") != std::string::npos);
    }
}

TEST_CASE("built-in templates splice motion phrases into full prompts") {
    const std::vector<PromptTemplate> templates = default_templates();
    REQUIRE(templates.size() == 8);

    const TokenSeq motion = motion_tokens(MotionKind::bounce);
    const std::vector<TokenSeq> prompts = enhance_prompts(templates, motion, UNetConfig{}.text_len);
    REQUIRE(prompts.size() == templates.size());

    std::set<std::tuple<int, int, int, int>> appearances;
    for (const auto& p : prompts) {
        const ParsedPrompt parsed = parse_prompt(p);
        CHECK(parsed.kind == MotionKind::bounce);
        appearances.insert({int(parsed.appearance.shape), parsed.appearance.color,
                            int(parsed.appearance.background), parsed.appearance.bg_color});
    }
    // the appearance prior spans distinct scenes
    CHECK(appearances.size() == templates.size());
}
