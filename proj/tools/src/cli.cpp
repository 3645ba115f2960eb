#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "glowgs/descriptor.hpp"
#include "glowgs/error.hpp"
#include "glowgs/featbank.hpp"
#include "glowgs/glowsim.hpp"
#include "glowgs/io.hpp"
#include "glowgs/metrics.hpp"
#include "glowgs/rasterizer.hpp"
#include "glowgs/trainer.hpp"

#ifndef GLOWGS_VERSION
#define GLOWGS_VERSION "dev"
#endif

namespace glowgs::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct GenSceneArgs {
    std::string spec = "street";
    std::string out;
    int views = 6;
    int test = 5;
    int candidates = 24;
    std::uint64_t seed = 0;
};

struct IngestArgs {
    std::string ref;
    std::string candidates;
    double threshold = 1.5;
    int max_rounds = 3;
    std::string report;
};

struct BankArgs {
    std::string views;
    int crops_per_view = 1;
    std::string extractor = "builtin";
    std::string out;
    std::uint64_t seed = 0;
};

struct TrainArgs {
    std::string scene_init;
    std::string views_dir;
    std::string bank;
    double lambda = 0.01;
    int iters = 1000;
    int semantic_every = 10;
    std::uint64_t seed = 0;
    std::string out;
    std::string log;
    double perturb_rot_deg = 2.0;
    double perturb_trans_frac = 0.01;
    std::size_t init_count = 2000;
    bool no_semantic = false;
};

struct RenderArgs {
    std::string model;
    std::string camera;
    std::string out;
};

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string mask;
    std::string out;
    std::string method = "glowgs";
};

std::string view_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03d", i);
    return buf;
}

GlowSceneSpec resolve_spec(const std::string& s) {
    for (int id = 0; id < preset_scene_count(); ++id) {
        if (preset_scene(id).name == s) return preset_scene(id);
    }
    if (!fs::exists(s)) throw InvalidInput("'" + s + "' is neither a preset scene name nor a spec file");
    return io::load_spec(s);
}

// Images with the given extensions, sorted by file name.
std::vector<fs::path> list_files(const fs::path& dir, std::initializer_list<const char*> exts) {
    if (!fs::is_directory(dir)) throw InvalidInput("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const std::string ext = e.path().extension().string();
        const std::string stem = e.path().stem().string();
        if (stem.size() > 5 && stem.ends_with("_glow")) continue;
        if (std::any_of(exts.begin(), exts.end(), [&](const char* x) { return ext == x; })) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<fs::path> list_images(const fs::path& dir) {
    auto files = list_files(dir, {".ppm", ".pgm"});
    if (files.empty()) throw InvalidInput("no .ppm images in '" + dir.string() + "'");
    return files;
}

std::vector<PosedImage> load_posed(const fs::path& dir) {
    std::vector<PosedImage> views;
    for (const fs::path& img : list_images(dir)) {
        fs::path cam = img;
        cam.replace_extension(".json");
        if (!fs::exists(cam)) throw InvalidInput("missing camera file '" + cam.string() + "'");
        views.push_back({io::load_camera(cam), io::read_image(img)});
    }
    return views;
}

void write_posed(const fs::path& dir, const GlowSceneSpec& spec, const std::vector<Camera>& cams, bool masks) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < cams.size(); ++i) {
        const std::string n = view_name(static_cast<int>(i));
        io::write_image(dir / (n + ".ppm"), render_reference(spec, cams[i]));
        io::save_camera(dir / (n + ".json"), cams[i]);
        if (masks) io::write_mask(dir / (n + "_glow.pgm"), glow_mask(spec, cams[i]).mask);
    }
}

FeatureSet describe_center(const BuiltinDescriptor& ex, const Image& img) {
    const Image fitted = fit_for_extractor(img, ex.crop_size());
    const int cs = ex.crop_size();
    return ex.describe(fitted, {(fitted.width - cs) / 2, (fitted.height - cs) / 2, cs, cs});
}

std::vector<FeatureSet> describe_dir(const BuiltinDescriptor& ex, const fs::path& dir) {
    std::vector<FeatureSet> out;
    for (const fs::path& p : list_images(dir)) out.push_back(describe_center(ex, io::read_image(p)));
    return out;
}

// Round subdirectories (round1, round2, ...) hold regenerated candidate sets; otherwise the
// directory itself is the only set.
std::vector<fs::path> candidate_rounds(const fs::path& dir) {
    std::vector<fs::path> rounds;
    for (int r = 1;; ++r) {
        const fs::path p = dir / ("round" + std::to_string(r));
        if (!fs::is_directory(p)) break;
        rounds.push_back(p);
    }
    if (rounds.empty()) rounds.push_back(dir);
    return rounds;
}

int cmd_gen_scene(const GenSceneArgs& a) {
    const GlowSceneSpec spec = resolve_spec(a.spec);
    spec.validate();
    Rng rng(a.seed);
    PoseSplitConfig pc;
    pc.train = a.views;
    pc.test = a.test;
    pc.candidates = a.candidates;
    const PoseSplit split = make_pose_split(spec.rig, pc, rng);
    const fs::path out(a.out);
    fs::create_directories(out);
    io::write_text(out / "spec.json", io::spec_to_json(spec));
    write_posed(out / "train", spec, split.train, false);
    write_posed(out / "test", spec, split.test, true);
    write_posed(out / "candidates", spec, split.candidates, false);
    std::cout << "wrote " << split.train.size() << " training, " << split.test.size() << " test and "
              << split.candidates.size() << " candidate views to " << out.string() << "\n";
    return kOk;
}

int cmd_ingest(const IngestArgs& a) {
    const BuiltinDescriptor ex;
    const FeatureSet ref = describe_center(ex, io::read_image(a.ref));
    const auto rounds = candidate_rounds(a.candidates);
    const CandidateSource regen = [&](int round) -> std::optional<std::vector<FeatureSet>> {
        if (round > static_cast<int>(rounds.size())) return std::nullopt;
        return describe_dir(ex, rounds[static_cast<std::size_t>(round - 1)]);
    };
    const VerificationReport rep = verify(ref, describe_dir(ex, rounds.front()), a.threshold, regen, a.max_rounds);
    json j;
    j["reference"] = a.ref;
    j["extractor"] = ex.name();
    j["threshold"] = rep.threshold;
    j["distance"] = rep.distance;
    j["accepted"] = rep.accepted;
    j["rounds"] = rep.rounds;
    j["frame_distances"] = rep.frame_distances;
    j["round_distances"] = rep.round_distances;
    const std::string text = j.dump(2) + "\n";
    if (a.report.empty()) {
        std::cout << text;
    } else {
        io::write_text(a.report, text);
    }
    std::cout << (rep.accepted ? "accepted" : "rejected") << " D=" << rep.distance << " after " << rep.rounds
              << " round(s)\n";
    return kOk;
}

int cmd_build_bank(const BankArgs& a) {
    if (a.extractor != "builtin") throw InvalidInput("unknown extractor '" + a.extractor + "' (only 'builtin' is built in)");
    std::vector<Image> views;
    for (const fs::path& p : list_images(a.views)) views.push_back(io::read_image(p));
    Rng rng(a.seed);
    const FeatureBank bank = build_bank(views, BuiltinDescriptor(), a.crops_per_view, rng);
    io::save_bytes(a.out, io::write_bank(bank));
    std::cout << "bank: " << bank.size() << " records of dim " << bank.dim << " from " << views.size() << " views\n";
    return kOk;
}

int cmd_train(const TrainArgs& a) {
    const std::vector<PosedImage> views = load_posed(a.views_dir);
    TrainConfig cfg;
    cfg.lambda = a.lambda;
    cfg.iters = a.iters;
    cfg.semantic_every = a.semantic_every;
    cfg.seed = a.seed;
    cfg.perturb_rot_deg = a.perturb_rot_deg;
    cfg.perturb_trans_frac = a.perturb_trans_frac;
    cfg.semantic_enabled = !a.no_semantic;
    cfg.validate();

    std::optional<FeatureBank> bank;
    if (!a.bank.empty()) bank = io::read_bank(io::load_bytes(a.bank));
    if (cfg.semantic_enabled && cfg.lambda < 1.0 && !bank) {
        throw InvalidInput("--bank is required when --lambda is below 1");
    }

    std::vector<Gaussian3D> scene;
    if (!a.scene_init.empty()) {
        scene = io::read_scene(io::load_bytes(a.scene_init));
    } else {
        Rng init_rng = Rng(a.seed).fork(7);
        InitConfig ic;
        ic.count = a.init_count;
        scene = init_scene(views, ic, init_rng);
    }
    const TrainResult res = train(std::move(scene), views, bank ? &*bank : nullptr, cfg);
    io::save_bytes(a.out, io::write_scene(res.scene));
    if (!a.log.empty()) io::write_text(a.log, res.log.to_jsonl());
    if (!res.log.records.empty()) {
        const TrainRecord& last = res.log.records.back();
        std::cout << "trained " << last.iter << " iterations, L_ori " << last.l_ori << ", " << last.gaussians
                  << " Gaussians\n";
    }
    return kOk;
}

int cmd_render(const RenderArgs& a) {
    const auto scene = io::read_scene(io::load_bytes(a.model));
    const Camera cam = io::load_camera(a.camera);
    io::write_image(a.out, rasterize(scene, cam).image);
    return kOk;
}

int cmd_eval(const EvalArgs& a) {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (fs::is_directory(a.pred)) {
        for (const fs::path& p : list_images(a.pred)) pairs.emplace_back(p, fs::path(a.gt) / p.filename());
    } else {
        pairs.emplace_back(a.pred, a.gt);
    }
    std::string lines;
    for (const auto& [pred_path, gt_path] : pairs) {
        const Image pred = io::read_image(pred_path);
        const Image gt = io::read_image(gt_path);
        std::optional<Mask> mask;
        if (!a.mask.empty()) {
            fs::path mp = a.mask;
            if (fs::is_directory(mp)) mp = mp / (pred_path.stem().string() + "_glow.pgm");
            mask = io::read_mask(mp);
        } else if (fs::is_directory(a.gt)) {
            const fs::path mp = fs::path(a.gt) / (pred_path.stem().string() + "_glow.pgm");
            if (fs::exists(mp)) mask = io::read_mask(mp);
        }
        const EvalReport rep = mask ? masked_eval(pred, gt, *mask) : evaluate(pred, gt);
        lines += io::eval_report_to_json(rep, pred_path.stem().string(), a.method) + "\n";
    }
    if (a.out.empty()) {
        std::cout << lines;
    } else {
        io::write_text(a.out, lines);
    }
    return kOk;
}

void print_header(const CLI::App& app, const CLI::App& sub, std::uint64_t seed) {
    const std::string config = sub.get_name() + "\n" + app.config_to_str(true, false);
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config)));
    std::cerr << "glowgs " << GLOWGS_VERSION << " " << sub.get_name() << " seed=" << seed << " config=" << hash << "\n";
}

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Glow-aware Gaussian splatting with a semantic feature bank"};
    app.require_subcommand(1);

    GenSceneArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-scene", "Render a synthetic night scene into train/test/candidate views");
    gen_cmd->add_option("--spec", gen.spec, "Preset name (street, plaza, alley) or spec JSON file")->capture_default_str();
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--views", gen.views, "Training views")->capture_default_str()->check(CLI::PositiveNumber);
    gen_cmd->add_option("--test", gen.test, "Held-out test views")->capture_default_str()->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--candidates", gen.candidates, "Candidate views at withheld poses")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--seed", gen.seed, "Seed for candidate poses")->capture_default_str();

    IngestArgs ing;
    auto* ing_cmd = app.add_subcommand("ingest", "Verify candidate frames against a reference view");
    ing_cmd->add_option("--ref", ing.ref, "Reference image")->required();
    ing_cmd->add_option("--candidates", ing.candidates, "Candidate directory (optionally with round1, round2, ...)")
        ->required();
    ing_cmd->add_option("--threshold", ing.threshold, "Acceptance threshold on the mean global distance")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    ing_cmd->add_option("--max-rounds", ing.max_rounds, "Maximum verification rounds")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    ing_cmd->add_option("--report", ing.report, "Write the JSON report here instead of stdout");

    BankArgs bank;
    auto* bank_cmd = app.add_subcommand("build-bank", "Describe views and write a feature bank");
    bank_cmd->add_option("--views", bank.views, "Directory of images")->required();
    bank_cmd->add_option("--crops-per-view", bank.crops_per_view, "Random crops per view")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    bank_cmd->add_option("--extractor", bank.extractor, "Feature extractor")->capture_default_str();
    bank_cmd->add_option("--out", bank.out, "Output bank file")->required();
    bank_cmd->add_option("--seed", bank.seed, "Seed for crop placement")->capture_default_str();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Optimize a Gaussian scene");
    train_cmd->add_option("--scene-init", tr.scene_init, "Initial scene file (random init when omitted)");
    train_cmd->add_option("--views-dir", tr.views_dir, "Directory of NNN.ppm images with NNN.json cameras")->required();
    train_cmd->add_option("--bank", tr.bank, "Feature bank file");
    train_cmd->add_option("--lambda", tr.lambda, "Weight of the original loss")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--iters", tr.iters, "Iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--semantic-every", tr.semantic_every, "Semantic render interval")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", tr.seed, "Seed")->capture_default_str();
    train_cmd->add_option("--out", tr.out, "Output scene file")->required();
    train_cmd->add_option("--log", tr.log, "JSONL training log");
    train_cmd->add_option("--perturb-rot", tr.perturb_rot_deg, "Maximum pose rotation perturbation, degrees")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--perturb-trans", tr.perturb_trans_frac, "Pose translation perturbation, fraction of extent")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--init-count", tr.init_count, "Gaussians in the random initialization")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_flag("--no-semantic", tr.no_semantic, "Disable the semantic branch entirely");

    RenderArgs rd;
    auto* render_cmd = app.add_subcommand("render", "Render a scene from a camera");
    render_cmd->add_option("--model", rd.model, "Scene file")->required();
    render_cmd->add_option("--camera", rd.camera, "Camera JSON file")->required();
    render_cmd->add_option("--out", rd.out, "Output image (.ppm)")->required();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "PSNR / SSIM with optional glow-region breakdown");
    eval_cmd->add_option("--pred", ev.pred, "Predicted image or directory")->required();
    eval_cmd->add_option("--gt", ev.gt, "Ground-truth image or directory")->required();
    eval_cmd->add_option("--mask", ev.mask, "Glow mask (.pgm) or directory of NNN_glow.pgm");
    eval_cmd->add_option("--out", ev.out, "JSONL report (stdout when omitted)");
    eval_cmd->add_option("--method", ev.method, "Method label stored in the report")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kUsage;
    }

    try {
        if (gen_cmd->parsed()) {
            print_header(app, *gen_cmd, gen.seed);
            return cmd_gen_scene(gen);
        }
        if (ing_cmd->parsed()) {
            print_header(app, *ing_cmd, 0);
            return cmd_ingest(ing);
        }
        if (bank_cmd->parsed()) {
            print_header(app, *bank_cmd, bank.seed);
            return cmd_build_bank(bank);
        }
        if (train_cmd->parsed()) {
            print_header(app, *train_cmd, tr.seed);
            return cmd_train(tr);
        }
        if (render_cmd->parsed()) {
            print_header(app, *render_cmd, 0);
            return cmd_render(rd);
        }
        if (eval_cmd->parsed()) {
            print_header(app, *eval_cmd, 0);
            return cmd_eval(ev);
        }
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericalError;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    }
    std::cerr << app.help();
    return kUsage;
}

}  // namespace glowgs::cli
