#include "glowgs/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "glowgs/error.hpp"

namespace glowgs::io {

namespace {

using json = nlohmann::json;

class Writer {
public:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename T>
    void uint(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    void f32(double v) { f32(static_cast<float>(v)); }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return b_.size() - pos_; }

    void need(std::size_t n, const char* field) const {
        if (remaining() < n) {
            throw FormatError(field, pos_, "truncated: need " + std::to_string(n) + " bytes, have " +
                                               std::to_string(remaining()));
        }
    }
    template <typename T>
    T uint(const char* field) {
        need(sizeof(T), field);
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    float f32(const char* field) {
        const std::size_t at = pos_;
        const float v = std::bit_cast<float>(uint<std::uint32_t>(field));
        if (!std::isfinite(v)) throw FormatError(field, at, "non-finite value");
        return v;
    }
    std::string str(std::size_t n, const char* field) {
        need(n, field);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void magic(const char* expected) {
        const std::size_t at = pos_;
        if (str(4, "magic") != expected) throw FormatError("magic", at, std::string("expected '") + expected + "'");
    }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

template <typename T>
void check_version(Reader& r, std::uint32_t expected) {
    const std::size_t at = r.offset();
    const auto v = r.uint<T>("version");
    if (v != expected) {
        throw FormatError("version", at, "unsupported version " + std::to_string(v) + " (expected " +
                                             std::to_string(expected) + ")");
    }
}

// Declared record count must exactly fill the remaining bytes.
void check_count(const Reader& r, std::uint64_t count, std::size_t record_size, std::size_t count_at) {
    const std::size_t rem = r.remaining();
    if (count == 0) throw FormatError("count", count_at, "record count must be at least 1");
    if (count > rem / record_size || count * record_size != rem) {
        const bool short_body = count > rem / record_size;
        throw FormatError(short_body ? "records" : "count", short_body ? r.offset() : count_at,
                          "count " + std::to_string(count) + " x " + std::to_string(record_size) +
                              " bytes does not match " + std::to_string(rem) + " remaining bytes");
    }
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j, const char* field) {
    if (!j.is_array() || j.size() != 3) throw FormatError(field, 0, "expected an array of 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError("json", e.byte, e.what());
    }
}

template <typename T>
T required(const json& j, const char* field) {
    if (!j.contains(field)) throw FormatError(field, 0, "missing field");
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(field, 0, e.what());
    }
}

template <typename T>
T optional_field(const json& j, const char* field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(field, 0, e.what());
    }
}

void skip_pnm_space(const Bytes& b, std::size_t& pos) {
    while (pos < b.size()) {
        if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else if (std::isspace(b[pos])) {
            ++pos;
        } else {
            break;
        }
    }
}

int pnm_int(const Bytes& b, std::size_t& pos, const char* field) {
    skip_pnm_space(b, pos);
    const std::size_t start = pos;
    long v = 0;
    while (pos < b.size() && b[pos] >= '0' && b[pos] <= '9') {
        v = v * 10 + (b[pos] - '0');
        if (v > 1 << 20) throw FormatError(field, start, "value too large");
        ++pos;
    }
    if (pos == start) throw FormatError(field, start, "expected a decimal integer");
    return static_cast<int>(v);
}

struct Pnm {
    int width = 0, height = 0, channels = 0;
    std::size_t data_offset = 0;
    Bytes bytes;
};

Pnm read_pnm(const std::filesystem::path& path) {
    Pnm p;
    p.bytes = load_bytes(path);
    const Bytes& b = p.bytes;
    if (b.size() < 2 || b[0] != 'P' || (b[1] != '6' && b[1] != '5')) {
        throw FormatError("magic", 0, path.string() + ": expected binary PPM (P6) or PGM (P5)");
    }
    p.channels = b[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    p.width = pnm_int(b, pos, "width");
    p.height = pnm_int(b, pos, "height");
    const std::size_t maxval_at = pos;
    const int maxval = pnm_int(b, pos, "maxval");
    if (maxval != 255) throw FormatError("maxval", maxval_at, "only 8-bit samples (maxval 255) are supported");
    if (p.width <= 0 || p.height <= 0) throw FormatError("width", 2, "image size must be positive");
    if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError("header", pos, "missing separator before samples");
    p.data_offset = pos + 1;
    const std::size_t n = static_cast<std::size_t>(p.width) * p.height * p.channels;
    if (b.size() - p.data_offset < n) throw FormatError("samples", p.data_offset, "truncated pixel data");
    return p;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void write_pnm(const std::filesystem::path& path, int w, int h, int channels, const Bytes& samples) {
    const std::string header = (channels == 3 ? "P6\n" : "P5\n") + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    Bytes out(header.begin(), header.end());
    out.insert(out.end(), samples.begin(), samples.end());
    save_bytes(path, out);
}

json region_json(const std::optional<RegionMetrics>& r) {
    if (!r) return nullptr;
    json j;
    j["pixels"] = r->pixels;
    j["windows"] = r->windows;
    j["psnr"] = r->psnr ? json(*r->psnr) : json(nullptr);
    j["ssim"] = r->ssim ? json(*r->ssim) : json(nullptr);
    return j;
}

}  // namespace

std::size_t bank_header_size(std::size_t name_len) { return 4 + 4 + 2 + name_len + 4 + 8; }

Bytes write_bank(const FeatureBank& bank) {
    if (bank.empty()) throw InvalidInput("cannot write an empty feature bank");
    if (bank.dim <= 0) throw InvalidInput("feature bank dimension must be positive");
    if (bank.extractor.size() > std::numeric_limits<std::uint16_t>::max()) throw InvalidInput("extractor name too long");
    if (bank.data.size() != bank.size() * static_cast<std::size_t>(bank.dim) || bank.patch_index.size() != bank.size()) {
        throw InvalidInput("feature bank arrays are inconsistent");
    }
    Writer w;
    w.raw("GSFB", 4);
    w.uint<std::uint32_t>(kBankVersion);
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(bank.extractor.size()));
    w.raw(bank.extractor.data(), bank.extractor.size());
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(bank.dim));
    w.uint<std::uint64_t>(bank.size());
    for (std::size_t s = 0; s < bank.size(); ++s) {
        w.uint<std::uint32_t>(bank.source_view[s]);
        w.uint<std::uint32_t>(bank.patch_index[s]);
        for (float v : bank.record(s)) w.f32(v);
    }
    return w.take();
}

FeatureBank read_bank(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.magic("GSFB");
    check_version<std::uint32_t>(r, kBankVersion);
    const auto name_len = r.uint<std::uint16_t>("name_len");
    FeatureBank bank;
    bank.extractor = r.str(name_len, "name");
    const std::size_t dim_at = r.offset();
    const auto dim = r.uint<std::uint32_t>("dim");
    if (dim == 0 || dim > (1u << 20)) throw FormatError("dim", dim_at, "dimension must lie in [1, 2^20]");
    bank.dim = static_cast<int>(dim);
    const std::size_t count_at = r.offset();
    const auto count = r.uint<std::uint64_t>("count");
    check_count(r, count, 8 + 4 * static_cast<std::size_t>(dim), count_at);
    bank.source_view.reserve(count);
    bank.patch_index.reserve(count);
    bank.data.reserve(count * dim);
    for (std::uint64_t s = 0; s < count; ++s) {
        bank.source_view.push_back(r.uint<std::uint32_t>("source_view"));
        bank.patch_index.push_back(r.uint<std::uint32_t>("patch_index"));
        for (std::uint32_t i = 0; i < dim; ++i) bank.data.push_back(r.f32("features"));
    }
    return bank;
}

std::size_t scene_record_size(int sh_degree) {
    const std::size_t nb = static_cast<std::size_t>(sh_degree + 1) * static_cast<std::size_t>(sh_degree + 1);
    return 4 * (3 + 4 + 3 + 1 + 3 * nb);
}

Bytes write_scene(std::span<const Gaussian3D> scene) {
    if (scene.empty()) throw InvalidInput("cannot write an empty scene");
    const int deg = scene.front().sh_degree();
    for (const Gaussian3D& g : scene) {
        if (g.sh_degree() != deg) throw InvalidInput("all Gaussians in a scene must share one SH degree");
    }
    if (deg > kMaxShDegree) throw InvalidInput("SH degree above " + std::to_string(kMaxShDegree) + " is not supported");
    Writer w;
    w.raw("GSSC", 4);
    w.uint<std::uint32_t>(kSceneVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(deg));
    w.uint<std::uint64_t>(scene.size());
    for (const Gaussian3D& g : scene) {
        for (int i = 0; i < 3; ++i) w.f32(g.mean[i]);
        Vec4 q = g.quat;
        const double norm = q.norm();
        if (!(norm > 0.0) || !std::isfinite(norm)) throw InvalidInput("cannot write a zero or non-finite quaternion");
        if (std::abs(norm - 1.0) > 1e-6) q /= norm;
        for (int i = 0; i < 4; ++i) w.f32(q[i]);
        for (int i = 0; i < 3; ++i) w.f32(g.log_scale[i]);
        w.f32(g.opacity_logit);
        for (double v : g.sh) w.f32(v);
    }
    return w.take();
}

std::vector<Gaussian3D> read_scene(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.magic("GSSC");
    check_version<std::uint32_t>(r, kSceneVersion);
    const std::size_t deg_at = r.offset();
    const auto deg = r.uint<std::uint32_t>("sh_degree");
    if (deg > kMaxShDegree) throw FormatError("sh_degree", deg_at, "SH degree must be at most " + std::to_string(kMaxShDegree));
    const std::size_t count_at = r.offset();
    const auto count = r.uint<std::uint64_t>("count");
    check_count(r, count, scene_record_size(static_cast<int>(deg)), count_at);
    const std::size_t n_sh = 3 * static_cast<std::size_t>(deg + 1) * (deg + 1);
    std::vector<Gaussian3D> scene(count);
    for (Gaussian3D& g : scene) {
        for (int i = 0; i < 3; ++i) g.mean[i] = r.f32("mean");
        const std::size_t quat_at = r.offset();
        for (int i = 0; i < 4; ++i) g.quat[i] = r.f32("quat");
        const double norm = g.quat.norm();
        if (std::abs(norm - 1.0) > 1e-3) {
            throw FormatError("quat", quat_at, "quaternion norm " + std::to_string(norm) + " is not within 1e-3 of 1");
        }
        // Values already unit to f32 precision are kept as stored so rewriting reproduces the bytes.
        if (std::abs(norm - 1.0) > 1e-6) g.quat /= norm;
        for (int i = 0; i < 3; ++i) g.log_scale[i] = r.f32("log_scale");
        g.opacity_logit = r.f32("opacity_logit");
        g.sh.resize(n_sh);
        for (double& v : g.sh) v = r.f32("sh");
    }
    return scene;
}

Bytes load_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "' for reading");
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void save_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
    const Bytes b = load_bytes(path);
    return std::string(b.begin(), b.end());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    save_bytes(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string camera_to_json(const Camera& cam) {
    json j;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    json rot = json::array();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot.push_back(cam.rot(r, c));
    j["rotation"] = rot;
    j["translation"] = vec_json(cam.trans);
    return j.dump(2) + "\n";
}

Camera camera_from_json(const std::string& text) {
    const json j = parse_json(text);
    Camera cam;
    cam.width = required<int>(j, "width");
    cam.height = required<int>(j, "height");
    cam.fx = required<double>(j, "fx");
    cam.fy = required<double>(j, "fy");
    cam.cx = required<double>(j, "cx");
    cam.cy = required<double>(j, "cy");
    const auto rot = required<std::vector<double>>(j, "rotation");
    if (rot.size() != 9) throw FormatError("rotation", 0, "expected 9 row-major values");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.rot(r, c) = rot[static_cast<std::size_t>(r * 3 + c)];
    cam.trans = vec_from(j.at("translation"), "translation");
    if (cam.width <= 0 || cam.height <= 0) throw FormatError("width", 0, "image size must be positive");
    try {
        cam.validate(1e-4);
    } catch (const InvalidInput& e) {
        throw FormatError("rotation", 0, e.what());
    }
    return cam;
}

Camera load_camera(const std::filesystem::path& path) { return camera_from_json(read_text(path)); }

void save_camera(const std::filesystem::path& path, const Camera& cam) { write_text(path, camera_to_json(cam)); }

std::string spec_to_json(const GlowSceneSpec& spec) {
    json j;
    j["name"] = spec.name;
    j["seed"] = spec.seed;
    j["ambient"] = spec.ambient;
    j["irradiance_gain"] = spec.irradiance_gain;
    j["apsf"] = {{"radius_px", spec.apsf.radius_px}, {"q", spec.apsf.q}};
    j["emitters"] = json::array();
    for (const Emitter& e : spec.emitters) {
        j["emitters"].push_back({{"position", vec_json(e.position)}, {"intensity", e.intensity}, {"color", vec_json(e.color)}});
    }
    j["surfaces"] = json::array();
    for (const Surface& s : spec.surfaces) {
        j["surfaces"].push_back({{"origin", vec_json(s.origin)},
                                 {"edge_u", vec_json(s.edge_u)},
                                 {"edge_v", vec_json(s.edge_v)},
                                 {"texture", s.texture},
                                 {"albedo", vec_json(s.albedo)},
                                 {"texture_scale", s.texture_scale}});
    }
    const CameraRig& r = spec.rig;
    j["rig"] = {{"target", vec_json(r.target)}, {"up", vec_json(r.up)},   {"radius", r.radius},
                {"height", r.height},           {"arc_deg", r.arc_deg}, {"fov_deg", r.fov_deg},
                {"width", r.width},             {"height_px", r.height_px}};
    return j.dump(2) + "\n";
}

GlowSceneSpec spec_from_json(const std::string& text) {
    const json j = parse_json(text);
    GlowSceneSpec s;
    s.name = optional_field<std::string>(j, "name", s.name);
    s.seed = optional_field<std::uint64_t>(j, "seed", s.seed);
    s.ambient = optional_field<double>(j, "ambient", s.ambient);
    s.irradiance_gain = optional_field<double>(j, "irradiance_gain", s.irradiance_gain);
    if (j.contains("apsf")) {
        const json& a = j.at("apsf");
        s.apsf.radius_px = optional_field<int>(a, "radius_px", s.apsf.radius_px);
        s.apsf.q = optional_field<double>(a, "q", s.apsf.q);
    }
    for (const json& e : optional_field<json>(j, "emitters", json::array())) {
        Emitter em;
        em.position = vec_from(e.at("position"), "emitters.position");
        em.intensity = required<double>(e, "intensity");
        if (e.contains("color")) em.color = vec_from(e.at("color"), "emitters.color");
        s.emitters.push_back(em);
    }
    for (const json& e : optional_field<json>(j, "surfaces", json::array())) {
        Surface sf;
        sf.origin = vec_from(e.at("origin"), "surfaces.origin");
        sf.edge_u = vec_from(e.at("edge_u"), "surfaces.edge_u");
        sf.edge_v = vec_from(e.at("edge_v"), "surfaces.edge_v");
        sf.texture = optional_field<std::string>(e, "texture", sf.texture);
        if (e.contains("albedo")) sf.albedo = vec_from(e.at("albedo"), "surfaces.albedo");
        sf.texture_scale = optional_field<double>(e, "texture_scale", sf.texture_scale);
        s.surfaces.push_back(sf);
    }
    if (j.contains("rig")) {
        const json& r = j.at("rig");
        if (r.contains("target")) s.rig.target = vec_from(r.at("target"), "rig.target");
        if (r.contains("up")) s.rig.up = vec_from(r.at("up"), "rig.up");
        s.rig.radius = optional_field<double>(r, "radius", s.rig.radius);
        s.rig.height = optional_field<double>(r, "height", s.rig.height);
        s.rig.arc_deg = optional_field<double>(r, "arc_deg", s.rig.arc_deg);
        s.rig.fov_deg = optional_field<double>(r, "fov_deg", s.rig.fov_deg);
        s.rig.width = optional_field<int>(r, "width", s.rig.width);
        s.rig.height_px = optional_field<int>(r, "height_px", s.rig.height_px);
    }
    s.validate();
    return s;
}

GlowSceneSpec load_spec(const std::filesystem::path& path) { return spec_from_json(read_text(path)); }

std::string eval_report_to_json(const EvalReport& report, const std::string& view, const std::string& method) {
    json j;
    j["view"] = view;
    j["method"] = method;
    j["psnr"] = report.psnr;
    j["ssim"] = report.ssim;
    j["lpips"] = report.lpips ? json(*report.lpips) : json(nullptr);
    j["glow"] = region_json(report.glow);
    j["non_glow"] = region_json(report.non_glow);
    return j.dump();
}

Image read_image(const std::filesystem::path& path) {
    const Pnm p = read_pnm(path);
    Image img(p.width, p.height, 3);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const std::size_t src = p.data_offset + i * p.channels + static_cast<std::size_t>(p.channels == 3 ? c : 0);
            img.data[i * 3 + c] = p.bytes[src] / 255.0;
        }
    }
    return img;
}

void write_image(const std::filesystem::path& path, const Image& img) {
    if (img.channels != 3 && img.channels != 1) throw InvalidInput("only 1- or 3-channel images can be written");
    Bytes samples(img.data.size());
    std::transform(img.data.begin(), img.data.end(), samples.begin(), to_byte);
    write_pnm(path, img.width, img.height, img.channels, samples);
}

Mask read_mask(const std::filesystem::path& path) {
    const Pnm p = read_pnm(path);
    Mask m(p.width, p.height);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = p.bytes[p.data_offset + i * p.channels] >= 128 ? 1 : 0;
    return m;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
    Bytes samples(mask.data.size());
    std::transform(mask.data.begin(), mask.data.end(), samples.begin(), [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
    write_pnm(path, mask.width, mask.height, 1, samples);
}

}  // namespace glowgs::io
