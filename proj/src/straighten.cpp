#include "vfq/straighten.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <thread>

#include "vfq/interp.hpp"

namespace vfq {

using nlohmann::json;

namespace {

// 5-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 5> kGLNodes{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                         0.9061798459386640};
constexpr std::array<double, 5> kGLWeights{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                           0.2369268850561891, 0.2369268850561891};

class ZCurve {
public:
    ZCurve(const std::vector<double>& z, const std::vector<double>& x, const std::vector<double>& y)
        : x_(z, x), y_(z, y), z_(z) {
        cumulative_.assign(z.size(), 0.0);
        for (std::size_t i = 0; i + 1 < z.size(); ++i) {
            cumulative_[i + 1] = cumulative_[i] + length(z[i], z[i + 1]);
        }
    }

    double total() const { return cumulative_.back(); }
    double z_front() const { return z_.front(); }
    double z_back() const { return z_.back(); }

    Vec3 position(double z) const { return {x_(z), y_(z), z}; }
    Vec3 tangent(double z) const { return Vec3(x_.derivative(z), y_.derivative(z), 1.0).normalized(); }

    /// z at which the arc length from the first knot equals s (0 <= s <= total).
    double z_at(double s) const {
        const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
        std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cumulative_.begin() - 1, 0));
        i = std::min(i, z_.size() - 2);
        double lo = z_[i];
        double hi = z_[i + 1];
        const double target = s - cumulative_[i];
        double z = lo + (hi - lo) * std::clamp(target / (cumulative_[i + 1] - cumulative_[i]), 0.0, 1.0);
        for (int iter = 0; iter < 60; ++iter) {
            const double f = length(z_[i], z) - target;
            if (std::abs(f) < 1e-13) {
                break;
            }
            if (f > 0.0) {
                hi = z;
            } else {
                lo = z;
            }
            double next = z - f / speed(z);
            if (!(next > lo && next < hi)) {
                next = 0.5 * (lo + hi);
            }
            z = next;
        }
        return z;
    }

private:
    double speed(double z) const {
        const double dx = x_.derivative(z);
        const double dy = y_.derivative(z);
        return std::sqrt(1.0 + dx * dx + dy * dy);
    }

    // Arc length between a and b inside one knot interval, or across several.
    double length(double a, double b) const {
        if (b <= a) {
            return 0.0;
        }
        double total = 0.0;
        const auto knots = x_.knots();
        double lo = a;
        auto it = std::upper_bound(knots.begin(), knots.end(), a);
        while (lo < b) {
            const double hi = (it != knots.end()) ? std::min(*it, b) : b;
            const double half = 0.5 * (hi - lo);
            const double mid = 0.5 * (hi + lo);
            for (std::size_t q = 0; q < kGLNodes.size(); ++q) {
                total += kGLWeights[q] * half * speed(mid + half * kGLNodes[q]);
            }
            lo = hi;
            if (it != knots.end()) {
                ++it;
            }
        }
        return total;
    }

    CubicSpline x_, y_;
    std::vector<double> z_;
    std::vector<double> cumulative_;
};

void orthonormalize(CurveSample& f) {
    f.tangent.normalize();
    f.u = (f.u - f.u.dot(f.tangent) * f.tangent).normalized();
    f.v = f.tangent.cross(f.u);
}

Vec3 lerp(const Vec3& a, const Vec3& b, double f) { return a + f * (b - a); }

}  // namespace

SpineCurve build_spine_curve(const CenterlinePolyline& polyline, const SpineCurveOptions& opts) {
    if (polyline.frame != CurveFrame::World) {
        throw InputError("build_spine_curve: expected a world-frame polyline");
    }
    if (polyline.points.size() < 4) {
        throw GeometryError("build_spine_curve: need at least four centerline points");
    }
    if (!(opts.step > 0.0) || opts.end_extension < 0.0 || opts.smoothing < 0.0) {
        throw InputError("build_spine_curve: invalid options");
    }
    std::vector<double> z, x, y;
    for (const auto& p : polyline.points) {
        if (!p.allFinite()) {
            throw GeometryError("build_spine_curve: non-finite centerline point");
        }
        if (!z.empty() && !(p.z() > z.back())) {
            throw GeometryError("build_spine_curve: degenerate centerline (z not strictly increasing)");
        }
        z.push_back(p.z());
        x.push_back(p.x());
        y.push_back(p.y());
    }
    const ZCurve curve(z, smooth_second_difference(z, x, opts.smoothing),
                       smooth_second_difference(z, y, opts.smoothing));
    const double length = curve.total();
    if (!(length > 0.0)) {
        throw GeometryError("build_spine_curve: zero-length centerline");
    }

    const Vec3 start = curve.position(curve.z_front());
    const Vec3 end = curve.position(curve.z_back());
    const Vec3 t_start = curve.tangent(curve.z_front());
    const Vec3 t_end = curve.tangent(curve.z_back());

    SpineCurve out;
    out.step = opts.step;
    const double span = length + 2.0 * opts.end_extension;
    const auto count = static_cast<std::size_t>(std::floor(span / opts.step + 1e-9)) + 1;
    out.samples.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        CurveSample& smp = out.samples[k];
        smp.s = static_cast<double>(k) * opts.step;
        const double sigma = smp.s - opts.end_extension;
        if (sigma < 0.0) {
            smp.position = start + sigma * t_start;
            smp.tangent = t_start;
        } else if (sigma > length) {
            smp.position = end + (sigma - length) * t_end;
            smp.tangent = t_end;
        } else {
            const double zs = curve.z_at(sigma);
            smp.position = curve.position(zs);
            smp.tangent = curve.tangent(zs);
        }
    }

    // Rotation-minimizing frames by double reflection.
    CurveSample& first = out.samples.front();
    first.u = Vec3::UnitX() - Vec3::UnitX().dot(first.tangent) * first.tangent;
    if (first.u.norm() < 1e-6) {
        throw GeometryError("build_spine_curve: curve starts parallel to the left-right axis");
    }
    orthonormalize(first);
    for (std::size_t k = 0; k + 1 < count; ++k) {
        const CurveSample& cur = out.samples[k];
        CurveSample& nxt = out.samples[k + 1];
        const Vec3 v1 = nxt.position - cur.position;
        const double c1 = v1.squaredNorm();
        Vec3 r_l = cur.u;
        Vec3 t_l = cur.tangent;
        if (c1 > 0.0) {
            r_l = cur.u - (2.0 / c1) * v1.dot(cur.u) * v1;
            t_l = cur.tangent - (2.0 / c1) * v1.dot(cur.tangent) * v1;
        }
        const Vec3 v2 = nxt.tangent - t_l;
        const double c2 = v2.squaredNorm();
        nxt.u = c2 > 1e-300 ? Vec3(r_l - (2.0 / c2) * v2.dot(r_l) * v2) : r_l;
        orthonormalize(nxt);
    }
    return out;
}

StraightenedVolume straighten_volume(const Volume3D& vol, const SpineCurve& curve, const StraightenOptions& opts) {
    if (!(opts.delta > 0.0) || opts.half_extent.x() < 0.0 || opts.half_extent.y() < 0.0) {
        throw InputError("straighten_volume: invalid options");
    }
    if (curve.samples.empty()) {
        throw GeometryError("straighten_volume: empty curve");
    }
    StraightenedVolume out;
    auto& tr = out.transform;
    tr.delta = opts.delta;
    tr.half_i = static_cast<std::size_t>(std::floor(opts.half_extent.x() / opts.delta + 1e-9));
    tr.half_j = static_cast<std::size_t>(std::floor(opts.half_extent.y() / opts.delta + 1e-9));
    tr.rows = curve.samples;

    const Index3 shape{2 * tr.half_i + 1, 2 * tr.half_j + 1, tr.rows.size()};
    const Vec3 origin(-static_cast<double>(tr.half_i) * opts.delta, -static_cast<double>(tr.half_j) * opts.delta,
                      tr.rows.front().s);
    out.volume = Volume3D(shape, Vec3::Constant(opts.delta), origin);

    auto fill_rows = [&](std::size_t k_begin, std::size_t k_end) {
        for (std::size_t k = k_begin; k < k_end; ++k) {
            const CurveSample& row = tr.rows[k];
            for (std::size_t j = 0; j < shape[1]; ++j) {
                const double oj = (static_cast<double>(j) - static_cast<double>(tr.half_j)) * opts.delta;
                const Vec3 base = row.position + oj * row.v;
                for (std::size_t i = 0; i < shape[0]; ++i) {
                    const double oi = (static_cast<double>(i) - static_cast<double>(tr.half_i)) * opts.delta;
                    out.volume.at(i, j, k) = trilinear_sample(vol, base + oi * row.u, opts.fill);
                }
            }
        }
    };

    const std::size_t workers = std::clamp<std::size_t>(opts.threads, 1, shape[2]);
    if (workers == 1) {
        fill_rows(0, shape[2]);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (shape[2] + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(shape[2], b + chunk);
            if (b < e) {
                pool.emplace_back(fill_rows, b, e);
            }
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    return out;
}

StraightenedImage mid_sagittal_slice(const StraightenedVolume& straightened, std::size_t average_halfwidth) {
    const auto& src = straightened.volume;
    const auto& tr = straightened.transform;
    const std::size_t ci = tr.half_i;
    const std::size_t w = std::min(average_halfwidth, ci);
    StraightenedImage out;
    out.transform = tr;
    const Index3 shape{src.shape()[1], src.shape()[2], 1};
    out.image = Volume3D(shape, Vec3(tr.delta, tr.delta, 1.0), Vec3(src.origin().y(), src.origin().z(), 0.0));
    for (std::size_t k = 0; k < shape[1]; ++k) {
        for (std::size_t j = 0; j < shape[0]; ++j) {
            double acc = 0.0;
            for (std::size_t i = ci - w; i <= ci + w; ++i) {
                acc += src.at(i, j, k);
            }
            out.image.at(j, k, 0) = static_cast<float>(acc / static_cast<double>(2 * w + 1));
        }
    }
    return out;
}

Vec3 to_world(const StraightenTransform& tr, const Vec2& px) {
    const double max_x = static_cast<double>(tr.columns() - 1);
    const double max_y = static_cast<double>(tr.rows.size() - 1);
    constexpr double eps = 1e-9;
    if (!px.allFinite() || px.x() < -eps || px.x() > max_x + eps || px.y() < -eps || px.y() > max_y + eps) {
        throw GeometryError("to_world: pixel outside the straightened image");
    }
    const double y = std::clamp(px.y(), 0.0, max_y);
    auto k0 = static_cast<std::size_t>(std::floor(y));
    if (k0 + 1 >= tr.rows.size()) {
        k0 = tr.rows.size() >= 2 ? tr.rows.size() - 2 : 0;
    }
    const std::size_t k1 = std::min(k0 + 1, tr.rows.size() - 1);
    const double f = y - static_cast<double>(k0);
    const double offset = (px.x() - static_cast<double>(tr.half_j)) * tr.delta;
    const Vec3 a = tr.rows[k0].position + offset * tr.rows[k0].v;
    const Vec3 b = tr.rows[k1].position + offset * tr.rows[k1].v;
    return lerp(a, b, f);
}

Vec2 to_image(const StraightenTransform& tr, const Vec3& world) {
    const auto& rows = tr.rows;
    if (rows.size() < 2) {
        throw GeometryError("to_image: transform has fewer than two rows");
    }
    auto along = [&](std::size_t k0, double f) {
        const std::size_t k1 = k0 + 1;
        const Vec3 c = lerp(rows[k0].position, rows[k1].position, f);
        const Vec3 t = lerp(rows[k0].tangent, rows[k1].tangent, f);
        return (world - c).dot(t);
    };
    // Among all rows whose normal plane brackets the point, keep the one nearest in space.
    double best_dist = std::numeric_limits<double>::infinity();
    double best_row = -1.0;
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
        const double g0 = along(k, 0.0);
        const double g1 = along(k, 1.0);
        if (g0 < 0.0 || g1 > 0.0) {
            continue;
        }
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (along(k, mid) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        const double f = 0.5 * (lo + hi);
        const double dist = (world - lerp(rows[k].position, rows[k + 1].position, f)).norm();
        if (dist < best_dist) {
            best_dist = dist;
            best_row = static_cast<double>(k) + f;
        }
    }
    if (best_row < 0.0) {
        throw GeometryError("to_image: point outside the straightened span");
    }
    const auto k0 = std::min(static_cast<std::size_t>(std::floor(best_row)), rows.size() - 2);
    const double f = best_row - static_cast<double>(k0);
    const Vec3 c = lerp(rows[k0].position, rows[k0 + 1].position, f);
    const Vec3 v = lerp(rows[k0].v, rows[k0 + 1].v, f);
    const double offset = (world - c).dot(v) / v.squaredNorm();
    return {static_cast<double>(tr.half_j) + offset / tr.delta, best_row};
}

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 3) {
        throw InputError("transform: expected a 3-vector");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

json transform_to_json(const StraightenTransform& tr) {
    json rows = json::array();
    for (const auto& r : tr.rows) {
        rows.push_back({{"s", r.s},
                        {"c", vec_json(r.position)},
                        {"t", vec_json(r.tangent)},
                        {"u", vec_json(r.u)},
                        {"v", vec_json(r.v)}});
    }
    return {{"delta", tr.delta}, {"half_i", tr.half_i}, {"half_j", tr.half_j}, {"rows", rows}};
}

StraightenTransform transform_from_json(const json& j) {
    try {
        StraightenTransform tr;
        tr.delta = j.at("delta").get<double>();
        tr.half_i = j.at("half_i").get<std::size_t>();
        tr.half_j = j.at("half_j").get<std::size_t>();
        for (const auto& r : j.at("rows")) {
            CurveSample s;
            s.s = r.at("s").get<double>();
            s.position = vec_from(r.at("c"));
            s.tangent = vec_from(r.at("t"));
            s.u = vec_from(r.at("u"));
            s.v = vec_from(r.at("v"));
            tr.rows.push_back(s);
        }
        if (!(tr.delta > 0.0) || tr.rows.size() < 2) {
            throw InputError("transform: needs delta > 0 and two or more rows");
        }
        return tr;
    } catch (const json::exception& e) {
        throw InputError(std::string("transform: malformed: ") + e.what());
    }
}

}  // namespace vfq
