#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfq/core.hpp"

namespace vfq::io {

namespace fs = std::filesystem;

/**
 * VG1 volume format: a JSON header
 *   {"shape":[nx,ny,nz],"spacing":[sx,sy,sz],"origin":[ox,oy,oz],"dtype":"f32","data":"<relative path>"}
 * plus a raw little-endian f32 file in x-fastest order.
 *
 * The raw file is written next to the header as <stem>.raw.
 * Malformed or missing files throw InputError naming the path.
 */
Volume3D read_vg1(const fs::path& header);
void write_vg1(const fs::path& header, const Volume3D& vol);

/// VA1 annotations: {"vertebrae":[{"label":..., "keypoints_mm":{"as":[x,y,z], ...}}]}.
std::vector<VertebraKeypoints> read_va1(const fs::path& path);
void write_va1(const fs::path& path, const std::vector<VertebraKeypoints>& vertebrae);

nlohmann::json to_json(const VertebraKeypoints& kps);
VertebraKeypoints keypoints_from_json(const nlohmann::json& j);

nlohmann::json read_json(const fs::path& path);
/// Writes pretty JSON with a trailing newline.
void write_json(const fs::path& path, const nlohmann::json& j);

}  // namespace vfq::io
