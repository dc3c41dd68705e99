#pragma once
// Deterministic, hand-auditable scoring of generated clips: color/shape
// frame descriptors stand in for learned embeddings, adjacent-frame
// descriptor similarity measures temporal consistency, and displacement
// correlation against analytic trajectories measures motion fidelity.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "motionlab/corpus.hpp"

namespace motionlab {

inline constexpr int kHistBins = 8;

namespace metrics_detail {

// pixels further than this (max channel distance) from the modal
// background color count as foreground
inline constexpr double kForegroundThreshold = 0.2;
// displacement sequences with RMS below this are treated as "no motion"
// so tracking noise cannot masquerade as correlation
inline constexpr double kMinDisplacementRms = 0.1;
inline constexpr int kMaxShift = 4;

} // namespace metrics_detail

// per-channel color histogram, Hu-style moment invariants of the
// foreground mask, and the foreground area fraction
struct FrameDescriptor {
    std::array<double, 3 * kHistBins> histogram{}; // each channel block sums to 1
    std::array<double, 7> hu{};
    double area = 0.0;

    std::vector<double> flat() const {
        std::vector<double> v(histogram.begin(), histogram.end());
        v.insert(v.end(), hu.begin(), hu.end());
        v.push_back(area);
        return v;
    }
};

namespace metrics_detail {

struct Foreground {
    std::vector<double> mask; // H*W, 1.0 where foreground
    double area_px = 0.0;
    bool any = false;
    double cx = 0.0, cy = 0.0;       // mask centroid, valid when any
    double bg_color[3] = {0, 0, 0};  // mean color of the modal cell
};

inline int bin_of(double v) {
    const int b = int(std::floor((v + 1.0) * 0.5 * kHistBins));
    return std::clamp(b, 0, kHistBins - 1);
}

// Modal quantized color marks the background; distance from its mean color
// grades each pixel's foreground weight. The ramp from the threshold up to
// the frame's peak distance recovers anti-aliased partial coverage, so the
// weighted area tracks the object's continuous area.
template <class S>
Foreground segment_foreground(const S* frame, int height, int width) {
    const size_t n = size_t(height) * size_t(width);
    std::vector<int> cell(n);
    std::vector<int> counts(size_t(kHistBins * kHistBins * kHistBins), 0);
    for (size_t i = 0; i < n; ++i) {
        const int b0 = bin_of(double(frame[i * 3 + 0]));
        const int b1 = bin_of(double(frame[i * 3 + 1]));
        const int b2 = bin_of(double(frame[i * 3 + 2]));
        cell[i] = (b0 * kHistBins + b1) * kHistBins + b2;
        ++counts[size_t(cell[i])];
    }
    const int modal =
        int(std::max_element(counts.begin(), counts.end()) - counts.begin());
    double bg[3] = {0, 0, 0};
    double m = 0;
    for (size_t i = 0; i < n; ++i) {
        if (cell[i] != modal) continue;
        for (int c = 0; c < 3; ++c) bg[c] += double(frame[i * 3 + size_t(c)]);
        m += 1.0;
    }
    for (int c = 0; c < 3; ++c) bg[c] /= m; // modal cell is never empty

    Foreground fg;
    for (int c = 0; c < 3; ++c) fg.bg_color[c] = bg[c];

    std::vector<double> dist(n, 0.0);
    double peak = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = 0;
        for (int c = 0; c < 3; ++c)
            d = std::max(d, std::abs(double(frame[i * 3 + size_t(c)]) - bg[c]));
        dist[i] = d;
        peak = std::max(peak, d);
    }

    fg.mask.assign(n, 0.0);
    if (peak <= kForegroundThreshold) return fg;
    const double ramp = peak - kForegroundThreshold;
    double sx = 0, sy = 0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const size_t i = size_t(y) * size_t(width) + size_t(x);
            if (dist[i] <= kForegroundThreshold) continue;
            const double w = std::min(1.0, (dist[i] - kForegroundThreshold) / ramp);
            fg.mask[i] = w;
            fg.area_px += w;
            sx += w * x;
            sy += w * y;
        }
    fg.any = fg.area_px > 0.5;
    if (fg.any) {
        fg.cx = sx / fg.area_px;
        fg.cy = sy / fg.area_px;
    }
    return fg;
}

inline std::array<double, 7> hu_moments(const Foreground& fg, int height, int width) {
    std::array<double, 7> hu{};
    if (!fg.any) return hu;
    double mu[4][4] = {};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double w = fg.mask[size_t(y) * size_t(width) + size_t(x)];
            if (w == 0.0) continue;
            const double dx = x - fg.cx, dy = y - fg.cy;
            double xp = 1.0;
            for (int p = 0; p <= 3; ++p) {
                double yq = 1.0;
                for (int q = 0; q <= 3 - p; ++q) {
                    mu[p][q] += w * xp * yq;
                    yq *= dy;
                }
                xp *= dx;
            }
        }
    auto eta = [&](int p, int q) {
        return mu[p][q] / std::pow(mu[0][0], 1.0 + double(p + q) / 2.0);
    };
    const double e20 = eta(2, 0), e02 = eta(0, 2), e11 = eta(1, 1);
    const double e30 = eta(3, 0), e03 = eta(0, 3), e21 = eta(2, 1), e12 = eta(1, 2);
    const double a = e30 + e12, b = e21 + e03;
    hu[0] = e20 + e02;
    hu[1] = (e20 - e02) * (e20 - e02) + 4.0 * e11 * e11;
    hu[2] = (e30 - 3 * e12) * (e30 - 3 * e12) + (3 * e21 - e03) * (3 * e21 - e03);
    hu[3] = a * a + b * b;
    hu[4] = (e30 - 3 * e12) * a * (a * a - 3 * b * b) + (3 * e21 - e03) * b * (3 * a * a - b * b);
    hu[5] = (e20 - e02) * (a * a - b * b) + 4.0 * e11 * a * b;
    hu[6] = (3 * e21 - e03) * a * (a * a - 3 * b * b) - (e30 - 3 * e12) * b * (3 * a * a - b * b);
    return hu;
}

} // namespace metrics_detail

// frame is [H,W,3] with finite values in [-1,1]
template <class S>
FrameDescriptor frame_descriptor(const Tensor<S>& frame) {
    require(frame.rank() == 3 && frame.dim(2) == 3, ErrCat::shape,
            "frame must be [H,W,3]");
    const int height = int(frame.dim(0)), width = int(frame.dim(1));
    for (S v : frame.vec())
        require(std::isfinite(double(v)) && double(v) >= -1.0 && double(v) <= 1.0,
                ErrCat::domain, "frame values must be finite and in [-1,1]");

    const S* d = frame.data();
    const size_t n = size_t(height) * size_t(width);
    const auto fg = metrics_detail::segment_foreground(d, height, width);

    // Anti-aliased edge pixels are known mixtures of the two region colors.
    // Their histogram mass is reassigned to the mixture endpoints so the
    // histogram reflects scene colors, not blend bins that shift with how
    // the object happens to align to the pixel grid.
    double fg_color[3] = {0, 0, 0};
    double wsum = 0;
    for (size_t i = 0; i < n; ++i) {
        const double w = fg.mask[i];
        if (w == 0.0) continue;
        for (int c = 0; c < 3; ++c) fg_color[c] += w * double(d[i * 3 + size_t(c)]);
        wsum += w;
    }
    if (wsum > 0)
        for (int c = 0; c < 3; ++c) fg_color[c] /= wsum;

    FrameDescriptor out;
    for (size_t i = 0; i < n; ++i) {
        const double w = fg.mask[i];
        for (int c = 0; c < 3; ++c) {
            if (w == 0.0 || w == 1.0) {
                out.histogram[size_t(c * kHistBins + metrics_detail::bin_of(
                                                         double(d[i * 3 + size_t(c)])))] += 1.0;
            } else {
                out.histogram[size_t(c * kHistBins + metrics_detail::bin_of(fg_color[c]))] += w;
                out.histogram[size_t(c * kHistBins +
                                     metrics_detail::bin_of(fg.bg_color[c]))] += 1.0 - w;
            }
        }
    }
    for (auto& h : out.histogram) h /= double(n);

    out.area = fg.area_px / double(n);
    out.hu = metrics_detail::hu_moments(fg, height, width);
    return out;
}

namespace metrics_detail {

template <class S>
void check_clip(const Tensor<S>& latent) {
    require(latent.rank() == 5 && latent.dim(0) == 1 && latent.dim(4) == 3, ErrCat::shape,
            "clip latent must be [1,F,H,W,3]");
}

template <class S>
Tensor<S> frame_of(const Tensor<S>& latent, int f) {
    const int64_t height = latent.dim(2), width = latent.dim(3);
    Tensor<S> out = Tensor<S>::zeros({height, width, 3});
    const size_t sz = size_t(height) * size_t(width) * 3;
    std::copy_n(latent.data() + size_t(f) * sz, sz, out.data());
    return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a == b) return 1.0; // identical descriptors score exactly one
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// uncentered correlation; sequences that barely move are defined to
// correlate 0 rather than amplifying noise
inline double congruence(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double n = double(a.size());
    if (std::sqrt(na / n) < kMinDisplacementRms || std::sqrt(nb / n) < kMinDisplacementRms)
        return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// integer shift aligning next onto prev with minimal mean squared error;
// ties resolve toward the smallest shift for determinism
template <class S>
std::array<int, 2> estimate_shift(const Tensor<S>& prev, const Tensor<S>& next) {
    const int height = int(prev.dim(0)), width = int(prev.dim(1));
    double best = 0;
    std::array<int, 2> arg = {0, 0};
    bool first = true;
    for (int sy = -kMaxShift; sy <= kMaxShift; ++sy)
        for (int sx = -kMaxShift; sx <= kMaxShift; ++sx) {
            double ssd = 0;
            int64_t count = 0;
            for (int y = 0; y < height; ++y) {
                const int ny = y + sy;
                if (ny < 0 || ny >= height) continue;
                for (int x = 0; x < width; ++x) {
                    const int nx = x + sx;
                    if (nx < 0 || nx >= width) continue;
                    const size_t ip = (size_t(y) * size_t(width) + size_t(x)) * 3;
                    const size_t in = (size_t(ny) * size_t(width) + size_t(nx)) * 3;
                    for (int c = 0; c < 3; ++c) {
                        const double diff =
                            double(prev.data()[ip + size_t(c)]) - double(next.data()[in + size_t(c)]);
                        ssd += diff * diff;
                    }
                    ++count;
                }
            }
            const double mean = ssd / double(count * 3);
            const int cost = std::abs(sx) + std::abs(sy);
            const int best_cost = std::abs(arg[0]) + std::abs(arg[1]);
            if (first || mean < best - 1e-12 ||
                (std::abs(mean - best) <= 1e-12 && cost < best_cost)) {
                best = mean;
                arg = {sx, sy};
                first = false;
            }
        }
    return arg;
}

} // namespace metrics_detail

// mean cosine similarity between adjacent frame descriptors
template <class S>
double temporal_consistency(const LatentClip<S>& clip) {
    metrics_detail::check_clip(clip.latent);
    const int frames = int(clip.latent.dim(1));
    require(frames >= 2, ErrCat::contract,
            "temporal consistency needs at least two frames");

    std::vector<std::vector<double>> descs;
    descs.reserve(size_t(frames));
    for (int f = 0; f < frames; ++f)
        descs.push_back(frame_descriptor(metrics_detail::frame_of(clip.latent, f)).flat());

    std::vector<double> cos;
    cos.reserve(size_t(frames - 1));
    for (int f = 0; f + 1 < frames; ++f)
        cos.push_back(metrics_detail::cosine(descs[size_t(f)], descs[size_t(f) + 1]));
    // summing in sorted order makes the mean independent of frame order,
    // so reversing the clip gives the bit-identical score
    std::sort(cos.begin(), cos.end());
    double acc = 0;
    for (double c : cos) acc += c;
    return acc / double(cos.size());
}

// one centered, static rendering of an appearance, used as the scoring
// target; the pixel-aligned center keeps its anti-aliasing fringe minimal
template <class S = float>
Tensor<S> canonical_static_frame(const AppearanceFactor& target, int height, int width) {
    SceneSpec spec;
    spec.motion = MotionFactor{MotionKind::translate_right, 0.0, double((width - 1) / 2),
                               double((height - 1) / 2), 2.5};
    spec.appearance = target;
    const RenderedClip<S> r = render_clip<S>(spec, 1, height, width);
    return metrics_detail::frame_of(r.clip.latent, 0);
}

namespace metrics_detail {

// bounded distance between descriptors: Hellinger on the color histograms,
// relative differences on the moment invariants, absolute on area
inline double descriptor_distance(const FrameDescriptor& a, const FrameDescriptor& b) {
    double hell = 0;
    for (int c = 0; c < 3; ++c) {
        double bc = 0;
        for (int i = 0; i < kHistBins; ++i)
            bc += std::sqrt(a.histogram[size_t(c * kHistBins + i)] *
                            b.histogram[size_t(c * kHistBins + i)]);
        hell += std::sqrt(std::max(0.0, 1.0 - bc));
    }
    hell /= 3.0;

    double shape = 0;
    for (int i = 0; i < 7; ++i)
        shape += std::abs(a.hu[size_t(i)] - b.hu[size_t(i)]) /
                 (std::abs(a.hu[size_t(i)]) + std::abs(b.hu[size_t(i)]) + 1e-6);
    shape /= 7.0;

    return 0.75 * hell + 0.15 * shape + 0.10 * std::abs(a.area - b.area);
}

} // namespace metrics_detail

// mean over frames of (1 - descriptor distance to the target's canonical
// static rendering); always in [0,1]
template <class S>
double appearance_match(const LatentClip<S>& clip, const AppearanceFactor& target) {
    metrics_detail::check_clip(clip.latent);
    validate_appearance(target);
    const int frames = int(clip.latent.dim(1));
    const int height = int(clip.latent.dim(2)), width = int(clip.latent.dim(3));
    require(frames >= 1, ErrCat::shape, "clip must have at least one frame");

    const FrameDescriptor want =
        frame_descriptor(canonical_static_frame<S>(target, height, width));
    double acc = 0;
    for (int f = 0; f < frames; ++f) {
        const FrameDescriptor got =
            frame_descriptor(metrics_detail::frame_of(clip.latent, f));
        acc += 1.0 - metrics_detail::descriptor_distance(got, want);
    }
    return std::clamp(acc / double(frames), 0.0, 1.0);
}

struct FidelityScore {
    double score = 0.0;
    bool trackable = true;
};

// Correlates observed per-frame displacements with the reference motion's
// analytic ones, on the components that motion actually drives: horizontal
// and/or vertical centroid displacement for positional kinds, object scale
// change for grow/shrink, and whole-frame shift for camera motion. A clip
// with no detectable foreground scores 0 with the flag cleared.
template <class S>
FidelityScore motion_fidelity(const LatentClip<S>& clip, const MotionFactor& reference) {
    metrics_detail::check_clip(clip.latent);
    const int frames = int(clip.latent.dim(1));
    require(frames >= 2, ErrCat::contract, "motion fidelity needs at least two frames");
    const auto canon_traj = trajectory(reference, frames);
    const auto canon_rad = radii(reference, frames);

    std::vector<Tensor<S>> fr;
    std::vector<metrics_detail::Foreground> fg;
    for (int f = 0; f < frames; ++f) {
        fr.push_back(metrics_detail::frame_of(clip.latent, f));
        const Tensor<S>& t = fr.back();
        for (S v : t.vec())
            require(std::isfinite(double(v)), ErrCat::domain, "clip values must be finite");
        fg.push_back(metrics_detail::segment_foreground(t.data(), int(t.dim(0)), int(t.dim(1))));
    }
    for (const auto& g : fg)
        if (!g.any) return {0.0, false};

    const MotionKind kind = reference.kind;
    const bool use_dx = kind == MotionKind::translate_right || kind == MotionKind::circular ||
                        kind == MotionKind::camera_pan || kind == MotionKind::shake;
    const bool use_dy = kind == MotionKind::translate_up || kind == MotionKind::bounce ||
                        kind == MotionKind::circular;
    const bool use_scale = kind == MotionKind::grow || kind == MotionKind::shrink;

    std::vector<double> obs_dx, obs_dy, obs_ds, can_dx, can_dy, can_ds;
    for (int f = 0; f + 1 < frames; ++f) {
        if (kind == MotionKind::camera_pan) {
            const auto shift = metrics_detail::estimate_shift(fr[size_t(f)], fr[size_t(f) + 1]);
            obs_dx.push_back(double(shift[0]));
            obs_dy.push_back(double(shift[1]));
        } else {
            obs_dx.push_back(fg[size_t(f) + 1].cx - fg[size_t(f)].cx);
            obs_dy.push_back(fg[size_t(f) + 1].cy - fg[size_t(f)].cy);
        }
        // scale uses cumulative change from the first frame: the discrete
        // pixel grid quantizes area, so frame-over-frame size deltas jitter
        // between zero and double steps while the running change does not
        obs_ds.push_back(std::sqrt(fg[size_t(f) + 1].area_px) - std::sqrt(fg[0].area_px));
        can_dx.push_back(canon_traj[size_t(f) + 1][0] - canon_traj[size_t(f)][0]);
        can_dy.push_back(canon_traj[size_t(f) + 1][1] - canon_traj[size_t(f)][1]);
        can_ds.push_back(canon_rad[size_t(f) + 1] - canon_rad[0]);
    }

    double acc = 0;
    int parts = 0;
    if (use_dx) {
        acc += metrics_detail::congruence(obs_dx, can_dx);
        ++parts;
    }
    if (use_dy) {
        acc += metrics_detail::congruence(obs_dy, can_dy);
        ++parts;
    }
    if (use_scale) {
        acc += metrics_detail::congruence(obs_ds, can_ds);
        ++parts;
    }
    return {acc / double(parts), true};
}

// ---- evaluation harness ---------------------------------------------------

struct EvalCase {
    MotionFactor motion; // reference motion the clip should reproduce
    ProtocolEntry entry; // prompt and the appearance it requests
};

struct SampleConfig {
    int steps = 20;
    double eta = 0.0;
    uint64_t seed = 0;
};

struct ReportRow {
    std::string clip_id;
    std::string prompt;
    double appearance_match = 0.0;
    double temporal_consistency = 0.0;
    double motion_fidelity = 0.0;
    bool trackable = true;
    bool failed = false;
};

struct MetricReport {
    std::vector<ReportRow> rows;
    double mean_appearance = 0.0;
    double mean_temporal = 0.0;
    double mean_motion = 0.0;
    int64_t failed_rows = 0;
};

// Samples one clip per case with per-row derived seeds and scores all three
// metrics. A row that fails to sample or score is marked failed and left
// out of the aggregates instead of aborting the run.
template <class S>
MetricReport run_report(const Model<S>& m, const std::vector<EvalCase>& cases,
                        const SampleConfig& cfg) {
    require(!cases.empty(), ErrCat::contract, "evaluation protocol is empty");
    require(cfg.steps > 0, ErrCat::config, "sampler steps must be positive");

    MetricReport report;
    double sa = 0, st = 0, sm = 0;
    for (size_t i = 0; i < cases.size(); ++i) {
        const EvalCase& c = cases[i];
        ReportRow row;
        char id[32];
        std::snprintf(id, sizeof id, "clip_%03zu", i);
        row.clip_id = id;
        try {
            row.prompt = detokenize(c.entry.prompt);
            const Shape shape = {1, int64_t(m.config.frames), int64_t(m.config.size),
                                 int64_t(m.config.size), int64_t(m.config.in_channels)};
            LatentClip<S> clip = ddim_sample(m, c.entry.prompt, cfg.steps, cfg.eta,
                                             Rng::derive(cfg.seed, uint64_t(i)), shape);
            // scoring assumes display range; sampled latents may overshoot
            S* d = clip.latent.data();
            for (int64_t j = 0; j < clip.latent.numel(); ++j)
                d[j] = std::clamp(d[j], S(-1), S(1));

            row.appearance_match = appearance_match(clip, c.entry.target);
            row.temporal_consistency = temporal_consistency(clip);
            const FidelityScore f = motion_fidelity(clip, c.motion);
            row.motion_fidelity = f.score;
            row.trackable = f.trackable;

            sa += row.appearance_match;
            st += row.temporal_consistency;
            sm += row.motion_fidelity;
        } catch (const Error&) {
            row.failed = true;
            ++report.failed_rows;
        }
        report.rows.push_back(std::move(row));
    }
    const double n = double(int64_t(cases.size()) - report.failed_rows);
    if (n > 0) {
        report.mean_appearance = sa / n;
        report.mean_temporal = st / n;
        report.mean_motion = sm / n;
    }
    return report;
}

inline std::string to_csv(const MetricReport& report) {
    std::string out = "clip_id,prompt,appearance_match,temporal_consistency,motion_fidelity\n";
    char line[256];
    for (const auto& r : report.rows) {
        if (r.failed) {
            out += r.clip_id + "," + r.prompt + ",failed,failed,failed\n";
            continue;
        }
        std::snprintf(line, sizeof line, ",%.6f,%.6f,%.6f\n", r.appearance_match,
                      r.temporal_consistency, r.motion_fidelity);
        out += r.clip_id + "," + r.prompt + line;
    }
    return out;
}

} // namespace motionlab
