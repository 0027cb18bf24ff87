#include "vfq/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "vfq/genant.hpp"

namespace vfq {

using nlohmann::json;

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

struct BodyFrame {
    Vec3 center;
    Vec3 t, u, v;
};

// G bands keep every planted value at least 0.02 away from the grading cuts.
double draw_genant(const PhantomConfig& cfg, std::mt19937_64& rng) {
    const double r = uniform01(rng);
    if (r < cfg.p_severe) return uniform(rng, 0.45, 0.58);
    if (r < cfg.p_severe + cfg.p_moderate) return uniform(rng, 0.62, 0.72);
    if (r < cfg.p_severe + cfg.p_moderate + cfg.p_mild) return uniform(rng, 0.76, 0.78);
    return uniform(rng, 0.86, 1.0);
}

std::vector<BodyFrame> body_frames(const PhantomConfig& cfg) {
    const double cx = cfg.origin.x() + 0.5 * static_cast<double>(cfg.shape[0] - 1) * cfg.spacing.x();
    const double cy = cfg.origin.y() + 0.5 * static_cast<double>(cfg.shape[1] - 1) * cfg.spacing.y();
    const double cz = cfg.origin.z() + 0.5 * static_cast<double>(cfg.shape[2] - 1) * cfg.spacing.z();
    const double z_first = cz - 0.5 * static_cast<double>(cfg.n_vertebrae - 1) * cfg.pitch;
    const double omega = 2.0 * std::numbers::pi / cfg.scoliosis_wavelength;

    std::vector<BodyFrame> frames;
    for (std::size_t k = 0; k < cfg.n_vertebrae; ++k) {
        const double z = z_first + static_cast<double>(k) * cfg.pitch;
        const double arg = omega * (z - z_first) + cfg.scoliosis_phase;
        BodyFrame f;
        f.center = Vec3(cx + cfg.scoliosis_amplitude * std::sin(arg), cy, z);
        f.t = Vec3(cfg.scoliosis_amplitude * omega * std::cos(arg), 0.0, 1.0).normalized();
        f.v = Vec3::UnitY();
        f.u = f.v.cross(f.t);
        frames.push_back(f);
    }
    return frames;
}

double height_at(const std::array<double, 3>& h, double b, double depth) {
    // b in [-depth/2, depth/2]; anterior edge at -depth/2.
    const double half = 0.5 * depth;
    if (b <= 0.0) {
        const double f = (b + half) / half;
        return h[0] + f * (h[1] - h[0]);
    }
    const double f = b / half;
    return h[1] + f * (h[2] - h[1]);
}

}  // namespace

std::vector<std::array<double, 3>> planted_heights(const PhantomConfig& cfg) {
    if (!cfg.heights.empty()) {
        if (cfg.heights.size() != cfg.n_vertebrae) {
            throw InputError("phantom: 'heights' must list one triple per vertebra");
        }
        return cfg.heights;
    }
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::array<double, 3>> out;
    for (std::size_t k = 0; k < cfg.n_vertebrae; ++k) {
        const double top = cfg.base_height + cfg.height_jitter * uniform(rng, -1.0, 1.0);
        const double g = draw_genant(cfg, rng);
        const auto shortest = static_cast<std::size_t>(std::min(uniform01(rng) * 3.0, 2.0));
        const double other = top * (g + (1.0 - g) * uniform(rng, 0.3, 1.0));
        std::array<double, 3> h{};
        h[shortest] = g * top;
        const bool flip = uniform01(rng) < 0.5;
        h[(shortest + (flip ? 1 : 2)) % 3] = top;
        h[(shortest + (flip ? 2 : 1)) % 3] = other;
        out.push_back(h);
    }
    return out;
}

Phantom generate_phantom(const PhantomConfig& cfg) {
    if (cfg.n_vertebrae < 2) {
        throw InputError("phantom: need at least two vertebrae");
    }
    if (!(cfg.pitch > 0.0) || !(cfg.body_width > 0.0) || !(cfg.body_depth > 0.0) ||
        !(cfg.scoliosis_wavelength > 0.0) || cfg.noise_sigma < 0.0) {
        throw InputError("phantom: pitch, body size, wavelength must be positive and noise non-negative");
    }
    const auto heights_mm = planted_heights(cfg);
    for (const auto& h : heights_mm) {
        if (!(h[0] > 0.0 && h[1] > 0.0 && h[2] > 0.0)) {
            throw InputError("phantom: heights must be positive");
        }
    }
    const auto frames = body_frames(cfg);

    Phantom out;
    out.volume = Volume3D(cfg.shape, cfg.spacing, cfg.origin, cfg.background_intensity);
    std::vector<std::uint8_t> owner(out.volume.size(), 0);
    const Vec3 lo_world = cfg.origin;
    const Vec3 hi_world = out.volume.to_world(
        Vec3(double(cfg.shape[0] - 1), double(cfg.shape[1] - 1), double(cfg.shape[2] - 1)));

    for (std::size_t k = 0; k < frames.size(); ++k) {
        const auto& f = frames[k];
        const auto& h = heights_mm[k];
        const double hw = 0.5 * cfg.body_width;
        const double hd = 0.5 * cfg.body_depth;
        const double hh = 0.5 * std::max({h[0], h[1], h[2]});
        if (2.0 * hh >= cfg.pitch) {
            throw InputError("phantom: vertebral bodies overlap (height exceeds pitch)");
        }

        Vec3 box_lo = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 box_hi = -box_lo;
        for (double su : {-1.0, 1.0}) {
            for (double sv : {-1.0, 1.0}) {
                for (double st : {-1.0, 1.0}) {
                    const Vec3 c = f.center + su * hw * f.u + sv * hd * f.v + st * hh * f.t;
                    box_lo = box_lo.cwiseMin(c);
                    box_hi = box_hi.cwiseMax(c);
                }
            }
        }
        if ((box_lo.array() < lo_world.array()).any() || (box_hi.array() > hi_world.array()).any()) {
            throw InputError("phantom: vertebra " + std::to_string(k) + " leaves the volume");
        }
        const Vec3 vlo = out.volume.to_voxel(box_lo);
        const Vec3 vhi = out.volume.to_voxel(box_hi);
        Index3 i0{}, i1{};
        for (int a = 0; a < 3; ++a) {
            i0[a] = static_cast<std::size_t>(std::max(0.0, std::floor(vlo[a])));
            i1[a] = std::min(cfg.shape[a] - 1, static_cast<std::size_t>(std::ceil(vhi[a])));
        }
        for (std::size_t z = i0[2]; z <= i1[2]; ++z) {
            for (std::size_t y = i0[1]; y <= i1[1]; ++y) {
                for (std::size_t x = i0[0]; x <= i1[0]; ++x) {
                    const Vec3 d = out.volume.to_world(Vec3(double(x), double(y), double(z))) - f.center;
                    const double l = d.dot(f.u);
                    const double b = d.dot(f.v);
                    const double a = d.dot(f.t);
                    if (std::abs(l) > hw || std::abs(b) > hd || std::abs(a) > 0.5 * height_at(h, b, cfg.body_depth)) {
                        continue;
                    }
                    const std::size_t idx = out.volume.linear(x, y, z);
                    if (owner[idx]) {
                        throw InputError("phantom: vertebral bodies overlap");
                    }
                    owner[idx] = 1;
                    out.volume.values()[idx] = cfg.body_intensity;
                }
            }
        }

        VertebraKeypoints kps;
        kps.label = "V" + std::to_string(k + 1);
        const Vec3 ant = f.center - hd * f.v;
        const Vec3 post = f.center + hd * f.v;
        kps[Keypoint::AS] = ant + 0.5 * h[0] * f.t;
        kps[Keypoint::AI] = ant - 0.5 * h[0] * f.t;
        kps[Keypoint::MS] = f.center + 0.5 * h[1] * f.t;
        kps[Keypoint::MI] = f.center - 0.5 * h[1] * f.t;
        kps[Keypoint::PS] = post + 0.5 * h[2] * f.t;
        kps[Keypoint::PI] = post - 0.5 * h[2] * f.t;
        out.annotations.push_back(kps);
        out.genant.push_back(genant_index(h[0], h[1], h[2]));
    }

    if (cfg.noise_sigma > 0.0) {
        std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
        std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
        for (auto& v : out.volume.values()) {
            v = static_cast<float>(v + noise(rng));
        }
    }
    return out;
}

std::vector<SliceProbMap> oracle_heatmaps(const std::vector<VertebraKeypoints>& annotations, const Volume3D& grid,
                                          double sigma_voxels) {
    if (!(sigma_voxels > 0.0)) {
        throw InputError("oracle_heatmaps: sigma must be positive");
    }
    const auto& n = grid.shape();
    const auto target = centerline_target(annotations, slice_positions(grid));
    std::vector<SliceProbMap> maps(n[2]);
    std::size_t next = 0;
    for (std::size_t z = 0; z < n[2]; ++z) {
        auto& m = maps[z];
        m.nx = n[0];
        m.ny = n[1];
        m.slice = z;
        m.values.assign(n[0] * n[1], 1.0 / static_cast<double>(n[0] * n[1]));
        const bool covered = next < target.points.size() && std::abs(target.points[next].z() - grid.slice_z(z)) < 1e-9;
        if (!covered) {
            m.valid = false;
            continue;
        }
        const Vec3 c = grid.to_voxel(target.points[next++]);
        double mass = 0.0;
        const double inv = 1.0 / (2.0 * sigma_voxels * sigma_voxels);
        for (std::size_t y = 0; y < n[1]; ++y) {
            for (std::size_t x = 0; x < n[0]; ++x) {
                const double dx = static_cast<double>(x) - c.x();
                const double dy = static_cast<double>(y) - c.y();
                const double w = std::exp(-(dx * dx + dy * dy) * inv);
                m.values[x + n[0] * y] = w;
                mass += w;
            }
        }
        if (!(mass > 0.0)) {
            // Entire Gaussian underflowed: fall back to a point mass at the nearest voxel.
            std::fill(m.values.begin(), m.values.end(), 0.0);
            const auto px = static_cast<std::size_t>(std::clamp(std::round(c.x()), 0.0, double(n[0] - 1)));
            const auto py = static_cast<std::size_t>(std::clamp(std::round(c.y()), 0.0, double(n[1] - 1)));
            m.values[px + n[0] * py] = 1.0;
            continue;
        }
        for (auto& v : m.values) v /= mass;
    }
    return maps;
}

Volume3D heatmaps_to_volume(const std::vector<SliceProbMap>& maps, const Volume3D& grid) {
    Volume3D out(grid.shape(), grid.spacing(), grid.origin());
    if (maps.size() != grid.shape()[2]) {
        throw GeometryError("heatmaps_to_volume: one map per slice required");
    }
    for (const auto& m : maps) {
        if (m.nx != grid.shape()[0] || m.ny != grid.shape()[1]) {
            throw GeometryError("heatmaps_to_volume: map shape differs from grid");
        }
        for (std::size_t y = 0; y < m.ny; ++y) {
            for (std::size_t x = 0; x < m.nx; ++x) {
                out.at(x, y, m.slice) = static_cast<float>(m.at(x, y));
            }
        }
    }
    return out;
}

Predictions oracle_predictions(const std::vector<GroundTruth2D>& gt, const AnchorGrid& anchors,
                               const AssignOptions& opts) {
    return predictions_from_targets(assign_targets(anchors, gt, opts));
}

PhantomConfig phantom_config_from_json(const json& j) {
    if (!j.is_object()) {
        throw InputError("phantom config must be a JSON object");
    }
    PhantomConfig c;
    try {
        if (j.contains("shape")) {
            const auto s = j.at("shape").get<std::array<long long, 3>>();
            for (int a = 0; a < 3; ++a) {
                if (s[a] <= 0) throw InputError("phantom config: shape entries must be positive");
                c.shape[a] = static_cast<std::size_t>(s[a]);
            }
        }
        auto vec3 = [&](const char* key, Vec3& dst) {
            if (j.contains(key)) {
                const auto v = j.at(key).get<std::array<double, 3>>();
                dst = Vec3(v[0], v[1], v[2]);
            }
        };
        vec3("spacing", c.spacing);
        vec3("origin", c.origin);
        if (!(c.spacing.array() > 0.0).all()) throw InputError("phantom config: spacing must be positive");
        c.n_vertebrae = j.value("n_vertebrae", c.n_vertebrae);
        c.pitch = j.value("pitch", c.pitch);
        c.scoliosis_amplitude = j.value("scoliosis_amplitude", c.scoliosis_amplitude);
        c.scoliosis_wavelength = j.value("scoliosis_wavelength", c.scoliosis_wavelength);
        c.scoliosis_phase = j.value("scoliosis_phase", c.scoliosis_phase);
        c.body_width = j.value("body_width", c.body_width);
        c.body_depth = j.value("body_depth", c.body_depth);
        c.base_height = j.value("base_height", c.base_height);
        c.height_jitter = j.value("height_jitter", c.height_jitter);
        if (j.contains("heights")) c.heights = j.at("heights").get<std::vector<std::array<double, 3>>>();
        c.p_mild = j.value("p_mild", c.p_mild);
        c.p_moderate = j.value("p_moderate", c.p_moderate);
        c.p_severe = j.value("p_severe", c.p_severe);
        c.body_intensity = j.value("body_intensity", c.body_intensity);
        c.background_intensity = j.value("background_intensity", c.background_intensity);
        c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw InputError(std::string("phantom config: ") + e.what());
    }
    return c;
}

json to_json(const PhantomConfig& c) {
    json j{{"shape", {c.shape[0], c.shape[1], c.shape[2]}},
           {"spacing", {c.spacing.x(), c.spacing.y(), c.spacing.z()}},
           {"origin", {c.origin.x(), c.origin.y(), c.origin.z()}},
           {"n_vertebrae", c.n_vertebrae},
           {"pitch", c.pitch},
           {"scoliosis_amplitude", c.scoliosis_amplitude},
           {"scoliosis_wavelength", c.scoliosis_wavelength},
           {"scoliosis_phase", c.scoliosis_phase},
           {"body_width", c.body_width},
           {"body_depth", c.body_depth},
           {"base_height", c.base_height},
           {"height_jitter", c.height_jitter},
           {"p_mild", c.p_mild},
           {"p_moderate", c.p_moderate},
           {"p_severe", c.p_severe},
           {"body_intensity", c.body_intensity},
           {"background_intensity", c.background_intensity},
           {"noise_sigma", c.noise_sigma},
           {"seed", c.seed}};
    if (!c.heights.empty()) j["heights"] = c.heights;
    return j;
}

}  // namespace vfq
