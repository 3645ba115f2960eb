#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "glowgs/descriptor.hpp"
#include "glowgs/featbank.hpp"
#include "glowgs/metrics.hpp"
#include "glowgs/rasterizer.hpp"
#include "glowgs/rng.hpp"

using namespace glowgs;

namespace {

std::vector<Gaussian3D> random_scene(std::size_t n, Rng& rng) {
    std::vector<Gaussian3D> scene(n);
    for (Gaussian3D& g : scene) {
        g.mean = Vec3(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0));
        g.quat = Vec4(rng.normal(), rng.normal(), rng.normal(), rng.normal()).normalized();
        g.log_scale = Vec3::Constant(std::log(rng.uniform(0.02, 0.12)));
        g.opacity_logit = rng.uniform(-2.0, 2.0);
        g.sh = {rng.normal(), rng.normal(), rng.normal()};
    }
    return scene;
}

Image random_image(int w, int h, Rng& rng) {
    Image img(w, h, 3);
    for (double& v : img.data) v = rng.uniform();
    return img;
}

Camera bench_camera(int side) {
    return Camera::look_at(Vec3(0.0, 0.0, -4.0), Vec3::Zero(), Vec3::UnitY(), side, side, 60.0);
}

void BM_RasterizeForward(benchmark::State& state) {
    Rng rng(1);
    const auto scene = random_scene(static_cast<std::size_t>(state.range(0)), rng);
    const Camera cam = bench_camera(256);
    for (auto _ : state) benchmark::DoNotOptimize(rasterize(scene, cam));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RasterizeForward)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_RasterizeBackward(benchmark::State& state) {
    Rng rng(2);
    const auto scene = random_scene(static_cast<std::size_t>(state.range(0)), rng);
    const Camera cam = bench_camera(256);
    const RenderOutput out = rasterize(scene, cam);
    const Image grad = random_image(256, 256, rng);
    for (auto _ : state) benchmark::DoNotOptimize(rasterize_backward(out, scene, grad));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RasterizeBackward)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Describe(benchmark::State& state) {
    Rng rng(3);
    const BuiltinDescriptor ex;
    const Image img = random_image(ex.crop_size(), ex.crop_size(), rng);
    const PixelRect crop{0, 0, ex.crop_size(), ex.crop_size()};
    for (auto _ : state) benchmark::DoNotOptimize(ex.describe(img, crop));
}
BENCHMARK(BM_Describe)->Unit(benchmark::kMillisecond);

void BM_DescribeBackward(benchmark::State& state) {
    Rng rng(4);
    const BuiltinDescriptor ex;
    const Image img = random_image(ex.crop_size(), ex.crop_size(), rng);
    const PixelRect crop{0, 0, ex.crop_size(), ex.crop_size()};
    const FeatureSet fs = ex.describe(img, crop);
    std::vector<double> grad(fs.patches.size());
    for (double& v : grad) v = rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(ex.describe_backward(img, crop, grad, {}));
}
BENCHMARK(BM_DescribeBackward)->Unit(benchmark::kMillisecond);

void BM_Retrieve(benchmark::State& state) {
    Rng rng(5);
    FeatureBank bank;
    bank.dim = BuiltinDescriptor::kDim;
    bank.extractor = "builtin";
    std::vector<double> v(static_cast<std::size_t>(bank.dim));
    for (std::int64_t s = 0; s < state.range(0); ++s) {
        for (double& x : v) x = rng.normal();
        bank.append(0, static_cast<std::uint32_t>(s), v);
    }
    for (double& x : v) x = rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(retrieve(bank, v));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Retrieve)->Arg(1 << 10)->Arg(1 << 14)->Arg(1 << 16);

void BM_Ssim(benchmark::State& state) {
    Rng rng(6);
    const Image a = random_image(256, 256, rng);
    const Image b = random_image(256, 256, rng);
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
