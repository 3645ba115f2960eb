#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "glowgs/featbank.hpp"
#include "glowgs/gauss.hpp"
#include "glowgs/glowsim.hpp"
#include "glowgs/image.hpp"
#include "glowgs/metrics.hpp"

namespace glowgs::io {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint32_t kBankVersion = 1;
inline constexpr std::uint32_t kSceneVersion = 1;

/// GSFB: "GSFB", u32 version, u16 name length, name bytes, u32 dim, u64 count, then per record
/// u32 source view, u32 patch index, dim x f32. Everything little-endian.
Bytes write_bank(const FeatureBank& bank);
FeatureBank read_bank(std::span<const std::uint8_t> bytes);
std::size_t bank_header_size(std::size_t name_len);

/// GSSC: "GSSC", u32 version, u32 sh degree, u64 count, then per Gaussian f32 mean[3],
/// quat[4] (w, x, y, z), log_scale[3], opacity_logit, sh[3 (deg + 1)^2]. Everything little-endian.
/// Quaternions are written normalized, since optimizer updates leave them off the unit sphere.
Bytes write_scene(std::span<const Gaussian3D> scene);
std::vector<Gaussian3D> read_scene(std::span<const std::uint8_t> bytes);
inline constexpr std::size_t kSceneHeaderSize = 4 + 4 + 4 + 8;
std::size_t scene_record_size(int sh_degree);

Bytes load_bytes(const std::filesystem::path& path);
void save_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::string camera_to_json(const Camera& cam);
Camera camera_from_json(const std::string& text);
Camera load_camera(const std::filesystem::path& path);
void save_camera(const std::filesystem::path& path, const Camera& cam);

std::string spec_to_json(const GlowSceneSpec& spec);
GlowSceneSpec spec_from_json(const std::string& text);
GlowSceneSpec load_spec(const std::filesystem::path& path);

/// One JSON object per line: {"view": ..., "method": ..., "psnr": ..., ...}.
std::string eval_report_to_json(const EvalReport& report, const std::string& view, const std::string& method);

/// 8-bit binary PPM (P6) or PGM (P5). Samples are scaled by 1/255 with no gamma curve.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace glowgs::io
