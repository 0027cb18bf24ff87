#include "vfq/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vfq::io {

using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

std::uint32_t swap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

template <typename T, std::size_t N>
std::array<T, N> fixed_array(const json& j, const char* key, const fs::path& where) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != N) {
        throw InputError(where.string() + ": field '" + key + "' must be an array of " + std::to_string(N));
    }
    std::array<T, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        if (!j[key][i].is_number()) {
            throw InputError(where.string() + ": field '" + key + "' must be numeric");
        }
        out[i] = j[key][i].get<T>();
    }
    return out;
}

Vec3 vec3_from(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3) {
        throw InputError(what + " must be [x,y,z]");
    }
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!j[i].is_number()) {
            throw InputError(what + " must be numeric");
        }
        v[i] = j[i].get<double>();
    }
    if (!v.allFinite()) {
        throw InputError(what + " is not finite");
    }
    return v;
}

}  // namespace

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": malformed JSON: " + e.what());
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

Volume3D read_vg1(const fs::path& header) {
    const json h = read_json(header);
    if (!h.is_object()) {
        throw InputError(header.string() + ": VG1 header must be an object");
    }
    const auto shape_arr = fixed_array<long long, 3>(h, "shape", header);
    const auto spacing = fixed_array<double, 3>(h, "spacing", header);
    const auto origin = fixed_array<double, 3>(h, "origin", header);
    if (h.value("dtype", std::string{}) != "f32") {
        throw InputError(header.string() + ": only dtype f32 is supported");
    }
    if (!h.contains("data") || !h["data"].is_string()) {
        throw InputError(header.string() + ": missing 'data' path");
    }
    Index3 shape{};
    for (int a = 0; a < 3; ++a) {
        if (shape_arr[a] <= 0) {
            throw InputError(header.string() + ": shape entries must be positive");
        }
        if (!(spacing[a] > 0.0)) {
            throw InputError(header.string() + ": spacing entries must be positive");
        }
        shape[a] = static_cast<std::size_t>(shape_arr[a]);
    }
    const fs::path data = header.parent_path() / h["data"].get<std::string>();
    std::ifstream in(data, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + data.string());
    }
    const std::size_t count = shape[0] * shape[1] * shape[2];
    std::vector<float> values(count);
    in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 4));
    if (static_cast<std::size_t>(in.gcount()) != count * 4) {
        throw InputError(data.string() + ": expected " + std::to_string(count * 4) + " bytes");
    }
    if constexpr (std::endian::native == std::endian::big) {
        for (auto& v : values) {
            v = std::bit_cast<float>(swap32(std::bit_cast<std::uint32_t>(v)));
        }
    }
    return Volume3D(shape, Vec3(spacing[0], spacing[1], spacing[2]), Vec3(origin[0], origin[1], origin[2]),
                    std::move(values));
}

void write_vg1(const fs::path& header, const Volume3D& vol) {
    fs::path data = header;
    data.replace_extension(".raw");
    json h;
    h["shape"] = {vol.shape()[0], vol.shape()[1], vol.shape()[2]};
    h["spacing"] = {vol.spacing().x(), vol.spacing().y(), vol.spacing().z()};
    h["origin"] = {vol.origin().x(), vol.origin().y(), vol.origin().z()};
    h["dtype"] = "f32";
    h["data"] = data.filename().string();
    write_json(header, h);

    std::ofstream out(data, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot write " + data.string());
    }
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(vol.values().data()),
                  static_cast<std::streamsize>(vol.values().size() * 4));
    } else {
        for (float v : vol.values()) {
            const std::uint32_t le = swap32(std::bit_cast<std::uint32_t>(v));
            out.write(reinterpret_cast<const char*>(&le), 4);
        }
    }
}

json to_json(const VertebraKeypoints& kps) {
    json j;
    if (!kps.label.empty()) {
        j["label"] = kps.label;
    }
    json pts = json::object();
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const auto& p = kps.points[i];
        pts[kKeypointKeys[i]] = {p.x(), p.y(), p.z()};
    }
    j["keypoints_mm"] = pts;
    return j;
}

VertebraKeypoints keypoints_from_json(const json& j) {
    if (!j.is_object() || !j.contains("keypoints_mm") || !j["keypoints_mm"].is_object()) {
        throw InputError("vertebra entry needs a 'keypoints_mm' object");
    }
    VertebraKeypoints kps;
    if (j.contains("label") && j["label"].is_string()) {
        kps.label = j["label"].get<std::string>();
    }
    const json& pts = j["keypoints_mm"];
    for (std::size_t i = 0; i < kNumKeypoints; ++i) {
        const char* key = kKeypointKeys[i];
        if (!pts.contains(key)) {
            throw InputError(std::string("missing keypoint '") + key + "'");
        }
        kps.points[i] = vec3_from(pts[key], std::string("keypoint '") + key + "'");
    }
    return kps;
}

std::vector<VertebraKeypoints> read_va1(const fs::path& path) {
    const json j = read_json(path);
    if (!j.is_object() || !j.contains("vertebrae") || !j["vertebrae"].is_array()) {
        throw InputError(path.string() + ": VA1 needs a 'vertebrae' array");
    }
    std::vector<VertebraKeypoints> out;
    for (const auto& v : j["vertebrae"]) {
        try {
            out.push_back(keypoints_from_json(v));
        } catch (const InputError& e) {
            throw InputError(path.string() + ": " + e.what());
        }
    }
    return out;
}

void write_va1(const fs::path& path, const std::vector<VertebraKeypoints>& vertebrae) {
    json arr = json::array();
    for (const auto& v : vertebrae) {
        arr.push_back(to_json(v));
    }
    write_json(path, json{{"vertebrae", arr}});
}

}  // namespace vfq::io
