#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "fuzz.hpp"
#include "glowgs/error.hpp"
#include "glowgs/io.hpp"

using namespace glowgs;
using namespace glowgs::testing;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / ("glowgs_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                      "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
    return dir;
}

std::string error_field(const std::function<void()>& f) {
    try {
        f();
    } catch (const FormatError& e) {
        return e.field();
    }
    return "<none>";
}

}  // namespace

TEST(BankFormat, RoundTripIsExact) {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const FeatureBank bank = random_bank(rng);
        const io::Bytes bytes = io::write_bank(bank);
        EXPECT_EQ(bytes.size(), io::bank_header_size(bank.extractor.size()) + bank.size() * (8 + 4 * bank.dim));
        const FeatureBank back = io::read_bank(bytes);
        ASSERT_TRUE(same_bank(bank, back));
        EXPECT_EQ(io::write_bank(back), bytes);
    }
}

TEST(BankFormat, SingleRecordSize) {
    FeatureBank bank;
    bank.dim = 17;
    bank.extractor = "builtin";
    bank.append(0, 0, std::vector<double>(17, 0.25));
    EXPECT_EQ(io::write_bank(bank).size(), io::bank_header_size(7) + 76);
    EXPECT_EQ(io::bank_header_size(7), 4u + 4 + 2 + 7 + 4 + 8);
}

TEST(BankFormat, RejectsEmptyBank) {
    FeatureBank bank;
    bank.dim = 3;
    EXPECT_THROW(io::write_bank(bank), InvalidInput);
    io::Bytes bytes{'G', 'S', 'F', 'B', 1, 0, 0, 0, 0, 0, 3, 0, 0, 0};
    bytes.resize(bytes.size() + 8, 0);
    EXPECT_EQ(error_field([&] { io::read_bank(bytes); }), "count");
}

TEST(BankFormat, FieldLevelErrors) {
    Rng rng(3);
    FeatureBank bank = random_bank(rng, 5, 3);
    bank.extractor = "ab";
    const io::Bytes good = io::write_bank(bank);

    io::Bytes bad = good;
    bad[0] = 'X';
    EXPECT_EQ(error_field([&] { io::read_bank(bad); }), "magic");
    bad = good;
    bad[4] = 2;
    EXPECT_EQ(error_field([&] { io::read_bank(bad); }), "version");
    bad = good;
    std::memset(bad.data() + 12, 0, 4);
    EXPECT_EQ(error_field([&] { io::read_bank(bad); }), "dim");
    bad = good;
    bad.push_back(0);
    EXPECT_EQ(error_field([&] { io::read_bank(bad); }), "count");
    bad = good;
    bad[16 + 7] = 0x7f;  // top byte of the u64 count
    EXPECT_EQ(error_field([&] { io::read_bank(bad); }), "records");
    bad = good;
    const std::size_t first_feature = io::bank_header_size(2) + 8;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + first_feature, &nan, 4);
    EXPECT_EQ(error_field([&] { io::read_bank(bad); }), "features");
}

TEST(BankFormat, EveryTruncationIsRejected) {
    Rng rng(5);
    const io::Bytes good = io::write_bank(random_bank(rng, 4, 3));
    for (std::size_t n = 0; n < good.size(); ++n) {
        const std::span<const std::uint8_t> prefix(good.data(), n);
        EXPECT_THROW(io::read_bank(prefix), FormatError) << "length " << n;
    }
}

TEST(SceneFormat, RoundTripIsExact) {
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        const auto scene = random_f32_scene(rng);
        const io::Bytes bytes = io::write_scene(scene);
        EXPECT_EQ(bytes.size(), io::kSceneHeaderSize + scene.size() * io::scene_record_size(scene[0].sh_degree()));
        const auto back = io::read_scene(bytes);
        ASSERT_TRUE(same_scene(scene, back));
        EXPECT_EQ(io::write_scene(back), bytes);
    }
}

TEST(SceneFormat, DegreeZeroRecordIs56Bytes) {
    EXPECT_EQ(io::scene_record_size(0), 56u);
    const std::vector<Gaussian3D> one(1);
    EXPECT_EQ(io::write_scene(one).size(), io::kSceneHeaderSize + 56);
}

TEST(SceneFormat, FieldLevelErrors) {
    Rng rng(9);
    std::vector<Gaussian3D> scene(2);
    const io::Bytes good = io::write_scene(scene);

    io::Bytes bad = good;
    bad[3] = 'Z';
    EXPECT_EQ(error_field([&] { io::read_scene(bad); }), "magic");
    bad = good;
    bad[8] = 3;
    EXPECT_EQ(error_field([&] { io::read_scene(bad); }), "sh_degree");
    bad = good;
    bad[8] = 1;  // degree 1 records are longer than the stored degree 0 ones
    EXPECT_EQ(error_field([&] { io::read_scene(bad); }), "records");
    bad = good;
    bad[12] = 3;
    EXPECT_EQ(error_field([&] { io::read_scene(bad); }), "records");
    bad = good;
    const float two = 2.0f;
    std::memcpy(bad.data() + io::kSceneHeaderSize + 12, &two, 4);
    try {
        io::read_scene(bad);
        FAIL() << "non-unit quaternion accepted";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.field(), "quat");
        EXPECT_EQ(e.offset(), io::kSceneHeaderSize + 12);
    }
    for (std::size_t n = 0; n < good.size(); ++n) {
        EXPECT_THROW(io::read_scene(std::span<const std::uint8_t>(good.data(), n)), FormatError);
    }
}

TEST(SceneFormat, SlightlyOffQuaternionIsRenormalized) {
    std::vector<Gaussian3D> scene(1);
    scene[0].quat = Vec4(1.0005, 0.0, 0.0, 0.0);
    const auto back = io::read_scene(io::write_scene(scene));
    EXPECT_NEAR(back[0].quat.norm(), 1.0, 1e-15);
    EXPECT_EQ(back[0].quat[0], 1.0);
}

TEST(SceneFormat, WriterPreconditions) {
    EXPECT_THROW(io::write_scene(std::vector<Gaussian3D>{}), InvalidInput);
    std::vector<Gaussian3D> mixed(2);
    mixed[1].sh.assign(12, 0.0);
    EXPECT_THROW(io::write_scene(mixed), InvalidInput);
}

TEST(CameraJson, RoundTrip) {
    const Camera cam = Camera::look_at(Vec3(1.3, -0.2, -4.1), Vec3(0.1, 0.2, 0.3), Vec3::UnitY(), 97, 61, 55.0);
    const Camera back = io::camera_from_json(io::camera_to_json(cam));
    EXPECT_EQ(back.width, 97);
    EXPECT_EQ(back.height, 61);
    EXPECT_EQ(back.fx, cam.fx);
    EXPECT_EQ(back.cy, cam.cy);
    EXPECT_EQ(back.rot, cam.rot);
    EXPECT_EQ(back.trans, cam.trans);
}

TEST(CameraJson, RejectsBadInput) {
    EXPECT_THROW(io::camera_from_json("{"), FormatError);
    const Camera cam = Camera::look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3::UnitY(), 8, 8, 60.0);
    std::string text = io::camera_to_json(cam);
    Camera skew = cam;
    skew.rot(0, 1) += 0.1;
    EXPECT_EQ(error_field([&] { io::camera_from_json(io::camera_to_json(skew)); }), "rotation");
}

TEST(SpecJson, RoundTripOfPresets) {
    for (int id = 0; id < preset_scene_count(); ++id) {
        const std::string text = io::spec_to_json(preset_scene(id));
        EXPECT_EQ(io::spec_to_json(io::spec_from_json(text)), text);
    }
    EXPECT_THROW(io::spec_from_json(R"({"apsf": {"radius_px": 0}})"), InvalidInput);
}

TEST(SpecJson, ShippedSceneFilesMatchPresets) {
    for (int id = 0; id < preset_scene_count(); ++id) {
        const GlowSceneSpec preset = preset_scene(id);
        const GlowSceneSpec loaded = io::load_spec(fs::path(GLOWGS_SCENES_DIR) / (preset.name + ".json"));
        EXPECT_EQ(io::spec_to_json(loaded), io::spec_to_json(preset)) << preset.name;
    }
}

TEST(ImageIo, PpmRoundTripAndMask) {
    const fs::path dir = temp_dir();
    Image img(5, 3, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i * 17 % 256) / 255.0;
    io::write_image(dir / "a.ppm", img);
    EXPECT_EQ(io::read_image(dir / "a.ppm").data, img.data);

    Image gray(4, 2, 1);
    gray.data = {0.0, 1.0, 0.5, 0.25, 0.75, 0.1, 0.9, 0.3};
    io::write_image(dir / "g.pgm", gray);
    const Image g3 = io::read_image(dir / "g.pgm");
    ASSERT_EQ(g3.channels, 3);
    EXPECT_EQ(g3.at(1, 0, 2), 1.0);
    EXPECT_EQ(g3.at(2, 0, 0), 128.0 / 255.0);

    Mask m(3, 2);
    m.set(1, 1, true);
    io::write_mask(dir / "m.pgm", m);
    EXPECT_EQ(io::read_mask(dir / "m.pgm").data, m.data);

    io::write_text(dir / "bad.ppm", "P3\n1 1\n255\n0 0 0\n");
    EXPECT_THROW(io::read_image(dir / "bad.ppm"), FormatError);
    io::write_text(dir / "short.ppm", "P6\n4 4\n255\nabc");
    EXPECT_THROW(io::read_image(dir / "short.ppm"), FormatError);
    fs::remove_all(dir);
}

TEST(EvalReportJson, NullsForAbsentValues) {
    EvalReport r;
    r.psnr = 30.5;
    r.ssim = 0.9;
    r.glow = RegionMetrics{};
    const std::string line = io::eval_report_to_json(r, "003", "glowgs");
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_NE(line.find("\"lpips\":null"), std::string::npos);
    EXPECT_NE(line.find("\"non_glow\":null"), std::string::npos);
    EXPECT_NE(line.find("\"view\":\"003\""), std::string::npos);
}

TEST(SceneFormat, WriterNormalizesQuaternions) {
    std::vector<Gaussian3D> scene(1);
    scene[0].quat = Vec4(0.3, -0.4, 0.1, 0.5);
    const auto back = io::read_scene(io::write_scene(scene));
    EXPECT_NEAR(back[0].quat.norm(), 1.0, 1e-6);
    EXPECT_NEAR(back[0].quat[1], -0.4 / scene[0].quat.norm(), 1e-7);
    scene[0].quat = Vec4::Zero();
    EXPECT_THROW(io::write_scene(scene), InvalidInput);
}
