#include "seal/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "seal/app.hpp"
#include "seal/benchmark.hpp"
#include "seal/error.hpp"
#include "seal/events.hpp"
#include "seal/guidance.hpp"
#include "seal/model.hpp"
#include "seal/training.hpp"

namespace seal::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// SEAL_CKPT wins over --ckpt.
std::string resolve_ckpt(const std::string& flag)
{
    if (const char* env = std::getenv("SEAL_CKPT"); env != nullptr && *env != '\0') return env;
    if (flag.empty()) throw ValidationError("no checkpoint: pass --ckpt or set SEAL_CKPT");
    return flag;
}

events::EventFormat format_of(const fs::path& p)
{
    return p.extension() == ".csv" ? events::EventFormat::csv : events::EventFormat::binary;
}

model::ModelConfig model_config(const std::string& preset, const std::string& file)
{
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw NotFoundError("cannot open model config " + file);
        return model::config_from_json(json::parse(in));
    }
    if (preset == "desk") return model::ModelConfig::desk();
    if (preset == "full") return model::ModelConfig{};
    throw ValidationError("--model must be 'desk' or 'full'");
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
}

struct Synth {
    std::string out, kind = "corpus", name = "synth";
    int frames = 64, classes = 3, small = 0, height = 64, width = 64, dim = 32;
    uint64_t seed = 1;
    double sigma = 0.0;
};

struct Voxelize {
    std::string events, out;
    int bins = 3, width = 0, height = 0;
    double window_ms = 25.0;
    int64_t t0 = -1;
};

struct BuildGuidance {
    std::string image, masks_s, masks_i, masks_p, out, frame_id, classes;
    int dim = 32;
    double coverage = guidance::kDefaultCoverageThreshold;
};

struct Train {
    std::string manifest, init, out, log, model = "desk", model_config, levels = "sip";
    int stage = 1, batch = 8;
    long iterations = 15'000;
    double lr = 2e-4;
    uint64_t seed = 0;
    bool no_vg = false, no_tg = false, no_fusion = false, no_se = false, no_mfe = false;
};

struct Eval {
    std::string ckpt, manifest, prompt = "box", out;
    bool random_baseline = false;
    uint64_t seed = 0;
};

struct Infer {
    std::string ckpt, frames, request;
};

struct Profile {
    std::vector<int> resolutions{32, 64, 128, 256, 512};
    std::vector<int> masks{10, 100, 1000};
    int channels = 64, repeats = 3;
    std::string out;
};

struct Export {
    std::string ckpt, manifest, prompt = "box", out;
};

struct Serve {
    std::string ckpt, frames, host = "127.0.0.1";
    int port = 8080;
};

int do_synth(const Synth& o, std::ostream& out)
{
    training::SynthCorpusConfig cc;
    cc.frames = o.frames;
    cc.seed = o.seed;
    cc.scene.num_classes = o.classes;
    cc.scene.small_objects = o.small;
    cc.scene.height = o.height;
    cc.scene.width = o.width;
    cc.scene.dim = o.dim;
    cc.scene.sigma = o.sigma;
    if (o.kind == "corpus") {
        out << training::write_synthetic_corpus(o.out, cc).string() << '\n';
    } else if (o.kind == "benchmark") {
        out << benchmark::write_synthetic_benchmark(o.out, cc, o.name).string() << '\n';
    } else {
        // Frame store for `serve`: one normalized voxel grid per frame.
        fs::create_directories(o.out);
        const events::VoxelConfig vc{3, cc.window_us, o.height, o.width};
        for (int i = 0; i < o.frames; ++i) {
            const auto scene = guidance::synth_guidance(o.seed + uint64_t(i), cc.scene);
            const int64_t t0 = int64_t(i) * cc.window_us;
            const auto ev = guidance::synth_events(scene, o.seed + uint64_t(i), t0, cc.window_us);
            events::save_voxel(events::normalize_voxel(events::voxelize(ev, vc, t0)),
                               fs::path(o.out) / (scene.frame_id + ".vox"));
        }
        out << o.out << '\n';
    }
    return 0;
}

int do_voxelize(const Voxelize& o, std::ostream& out)
{
    const auto stream = events::load_events(o.events, format_of(o.events), o.width, o.height);
    const events::VoxelConfig vc{o.bins, static_cast<int64_t>(std::llround(o.window_ms * 1000.0)),
                                 o.height > 0 ? o.height : stream.height, o.width > 0 ? o.width : stream.width};
    const auto grid = o.t0 >= 0 ? events::voxelize(stream, vc, o.t0) : events::voxelize(stream, vc);
    events::save_voxel(grid, o.out);
    out << "wrote " << o.out << " (" << vc.bins << "x" << vc.height << "x" << vc.width << ")\n";
    return 0;
}

int do_build_guidance(const BuildGuidance& o, std::ostream& out)
{
    const Image img = load_ppm(o.image);
    std::vector<std::string> classes;
    std::stringstream ss(o.classes);
    for (std::string c; std::getline(ss, c, ',');) {
        if (!c.empty()) classes.push_back(c);
    }
    if (classes.empty()) throw ValidationError("--classes needs at least one class name");
    const std::string id = o.frame_id.empty() ? fs::path(o.image).stem().string() : o.frame_id;
    std::array<guidance::MaskSet, 3> sets;
    const std::array<std::string, 3> paths{o.masks_s, o.masks_i, o.masks_p};
    for (int l = 0; l < 3; ++l) sets[l] = guidance::load_mask_set(paths[l], guidance::kLevels[l], id);
    const auto providers = guidance::synthetic_providers(classes, o.dim, 0.0);
    const auto g = guidance::build_guidance(img, sets, providers, o.coverage);
    guidance::save_guidance(g, o.out);
    out << "guidance for " << id << ": " << g.level(guidance::Level::semantic).records.size() << "/"
        << g.level(guidance::Level::instance).records.size() << "/" << g.level(guidance::Level::part).records.size()
        << " masks (s/i/p)\n";
    return 0;
}

int do_train(const Train& o, std::ostream& out)
{
    if (o.stage != 1 && o.stage != 2) throw ValidationError("--stage must be 1 or 2");
    if (o.stage == 2 && o.init.empty()) {
        throw PreconditionError("stage 2 requires a stage-1 checkpoint (--init)");
    }
    training::TrainConfig tc;
    tc.stage = o.stage;
    tc.iterations = o.iterations;
    tc.batch = o.batch;
    tc.lr = o.lr;
    tc.seed = o.seed;
    tc.visual = !o.no_vg;
    tc.text = !o.no_tg;
    tc.levels = {o.levels.find('s') != std::string::npos, o.levels.find('i') != std::string::npos,
                 o.levels.find('p') != std::string::npos};
    if (o.levels.find_first_not_of("sip") != std::string::npos) throw ValidationError("--levels takes letters from 'sip'");
    tc.checkpoint_path = o.out;

    std::optional<model::Model> init;
    model::ModelConfig mc;
    if (!o.init.empty()) {
        init.emplace(model::load_checkpoint(o.init));
        mc = init->config();
    } else {
        mc = model_config(o.model, o.model_config);
    }
    mc.fusion = !o.no_fusion;
    mc.spatial_encoding = !o.no_se;
    mc.mask_enhancer = !o.no_mfe;
    const auto data = training::load_dataset(o.manifest, mc);
    const auto result = training::train(data, tc, mc, init ? &*init : nullptr);
    if (!o.log.empty()) result.log.write_jsonl(o.log);
    const auto& e = result.log.entries;
    const long n = static_cast<long>(e.size());
    out << "stage " << o.stage << ": " << n << " iterations, final loss "
        << result.log.mean_loss(std::max(0L, n - 10), n) << '\n';
    if (!o.out.empty()) out << "checkpoint " << o.out << '\n';
    return 0;
}

benchmark::TextEncoder encoder_for(const model::Model& m, const model::CheckpointMeta& meta)
{
    auto enc = std::make_shared<guidance::SyntheticTextEncoder>(m.config().d, meta.classes);
    return [enc](const std::string& s) { return enc->encode(s); };
}

int do_eval(const Eval& o, std::ostream& out)
{
    model::CheckpointMeta meta;
    const auto m = model::load_checkpoint(resolve_ckpt(o.ckpt), &meta);
    const auto manifest = benchmark::load_manifest(o.manifest);
    const auto kind = benchmark::prompt_kind_from_string(o.prompt);
    auto preds = benchmark::predict(m, manifest, kind, encoder_for(m, meta));
    if (o.random_baseline) preds = benchmark::random_labels(preds, manifest, o.seed);
    const auto report = benchmark::evaluate_ap(preds, manifest, o.prompt);
    out << report.table();
    const auto doc = report.to_json().dump(2);
    if (o.out.empty()) {
        out << doc << '\n';
    } else {
        write_text(o.out, doc + "\n");
    }
    return 0;
}

int do_infer(const Infer& o, std::ostream& out)
{
    const auto session = app::Session::open(resolve_ckpt(o.ckpt), o.frames);
    json doc;
    if (o.request == "-") {
        doc = json::parse(std::cin);
    } else {
        std::ifstream in(o.request);
        if (!in) throw NotFoundError("cannot open request " + o.request);
        doc = json::parse(in);
    }
    out << app::handle_infer(app::infer_request_from_json(doc), *session).to_json().dump() << '\n';
    return 0;
}

int do_profile(const Profile& o, std::ostream& out)
{
    const auto rows = benchmark::profile_roi_align(o.resolutions, o.masks, o.channels, o.repeats);
    const auto csv = benchmark::profile_csv(rows);
    if (o.out.empty()) {
        out << csv;
    } else {
        write_text(o.out, csv);
        out << "wrote " << o.out << '\n';
    }
    return 0;
}

int do_params(const std::string& ckpt, std::ostream& out)
{
    const auto m = model::load_checkpoint(resolve_ckpt(ckpt));
    std::size_t total = 0;
    for (const auto& [group, n] : model::count_params(m.params())) {
        out << group << ',' << n << '\n';
        total += n;
    }
    out << "total," << total << '\n';
    return 0;
}

int do_export(const Export& o, std::ostream& out)
{
    model::CheckpointMeta meta;
    const auto m = model::load_checkpoint(resolve_ckpt(o.ckpt), &meta);
    const auto manifest = benchmark::load_manifest(o.manifest);
    const auto rows = benchmark::export_mask_features(m, manifest, benchmark::prompt_kind_from_string(o.prompt),
                                                      encoder_for(m, meta));
    benchmark::save_feature_dump(rows, o.out);
    std::size_t dead = 0;
    for (const auto& r : rows) dead += r.dead;
    out << rows.size() << " rows (" << dead << " dead) -> " << o.out << '\n';
    return 0;
}

int do_serve(const Serve& o, std::ostream& out)
{
    app::Server server(app::Session::open(resolve_ckpt(o.ckpt), o.frames));
    const int port = server.bind(o.host, o.port);
    out << "listening on http://" << o.host << ':' << port << std::endl;
    server.listen();
    return 0;
}

int exit_code_for(const Error& e)
{
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const PreconditionError*>(&e) ||
        dynamic_cast<const ConfigError*>(&e)) {
        return 2;
    }
    return 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"seal: event-camera open-vocabulary segmentation pipeline", "seal"};
    app.require_subcommand(1);

    Synth synth;
    auto* sc = app.add_subcommand("synth", "Write a synthetic corpus, benchmark or frame store");
    sc->add_option("--out", synth.out, "Output directory")->required();
    sc->add_option("--kind", synth.kind, "corpus | benchmark | frames")
        ->check(CLI::IsMember({"corpus", "benchmark", "frames"}));
    sc->add_option("--frames", synth.frames)->check(CLI::PositiveNumber);
    sc->add_option("--seed", synth.seed);
    sc->add_option("--classes", synth.classes)->check(CLI::PositiveNumber);
    sc->add_option("--small", synth.small, "Small objects per frame")->check(CLI::NonNegativeNumber);
    sc->add_option("--height", synth.height)->check(CLI::PositiveNumber);
    sc->add_option("--width", synth.width)->check(CLI::PositiveNumber);
    sc->add_option("--dim", synth.dim, "Teacher feature dim")->check(CLI::PositiveNumber);
    sc->add_option("--sigma", synth.sigma, "Teacher noise")->check(CLI::NonNegativeNumber);
    sc->add_option("--name", synth.name, "Benchmark name");

    Voxelize vox;
    auto* vc = app.add_subcommand("voxelize", "Events -> voxel grid");
    vc->add_option("--events", vox.events)->required()->check(CLI::ExistingFile);
    vc->add_option("--out", vox.out)->required();
    vc->add_option("--bins", vox.bins)->check(CLI::PositiveNumber);
    vc->add_option("--window-ms", vox.window_ms)->check(CLI::PositiveNumber);
    vc->add_option("--t0", vox.t0, "Window start in microseconds (default: first event)");
    vc->add_option("--width", vox.width);
    vc->add_option("--height", vox.height);

    BuildGuidance bg;
    auto* gc = app.add_subcommand("build-guidance", "Masks + image -> hierarchical guidance (synthetic teacher)");
    gc->add_option("--image", bg.image)->required()->check(CLI::ExistingFile);
    gc->add_option("--masks-s", bg.masks_s)->required()->check(CLI::ExistingFile);
    gc->add_option("--masks-i", bg.masks_i)->required()->check(CLI::ExistingFile);
    gc->add_option("--masks-p", bg.masks_p)->required()->check(CLI::ExistingFile);
    gc->add_option("--classes", bg.classes, "Comma-separated class table")->required();
    gc->add_option("--out", bg.out)->required();
    gc->add_option("--frame-id", bg.frame_id);
    gc->add_option("--dim", bg.dim)->check(CLI::PositiveNumber);
    gc->add_option("--coverage", bg.coverage)->check(CLI::Range(0.0, 1.0));

    Train tr;
    auto* tc = app.add_subcommand("train", "Stage 1 or stage 2 training");
    tc->add_option("--manifest", tr.manifest)->required();
    tc->add_option("--stage", tr.stage);
    tc->add_option("--init", tr.init, "Stage-1 checkpoint (required for stage 2)");
    tc->add_option("--out", tr.out, "Checkpoint path");
    tc->add_option("--log", tr.log, "JSONL training log");
    tc->add_option("--iterations", tr.iterations);
    tc->add_option("--batch", tr.batch);
    tc->add_option("--lr", tr.lr);
    tc->add_option("--seed", tr.seed);
    tc->add_option("--model", tr.model, "desk | full")->check(CLI::IsMember({"desk", "full"}));
    tc->add_option("--model-config", tr.model_config, "Model config JSON");
    tc->add_option("--levels", tr.levels, "Guidance levels, subset of 'sip'");
    tc->add_flag("--no-vg", tr.no_vg);
    tc->add_flag("--no-tg", tr.no_tg);
    tc->add_flag("--no-fusion", tr.no_fusion);
    tc->add_flag("--no-se", tr.no_se);
    tc->add_flag("--no-mfe", tr.no_mfe);

    Eval ev;
    auto* ec = app.add_subcommand("eval", "AP on a benchmark manifest");
    ec->add_option("--ckpt", ev.ckpt);
    ec->add_option("--manifest", ev.manifest)->required();
    ec->add_option("--prompt", ev.prompt)->check(CLI::IsMember({"box", "point"}));
    ec->add_option("--out", ev.out, "Report JSON path");
    ec->add_flag("--random-baseline", ev.random_baseline, "Replace predicted labels with random ones");
    ec->add_option("--seed", ev.seed);

    Infer inf;
    auto* ic = app.add_subcommand("infer", "Answer one inference request");
    ic->add_option("--ckpt", inf.ckpt);
    ic->add_option("--frames", inf.frames, "Frame store directory")->required();
    ic->add_option("--request", inf.request, "Request JSON file, or - for stdin")->required();

    Profile pr;
    auto* pc = app.add_subcommand("profile", "RoI-Align timing table");
    pc->add_option("--resolutions", pr.resolutions)->delimiter(',');
    pc->add_option("--masks", pr.masks)->delimiter(',');
    pc->add_option("--channels", pr.channels);
    pc->add_option("--repeats", pr.repeats);
    pc->add_option("--out", pr.out);

    std::string params_ckpt;
    auto* pm = app.add_subcommand("params", "Parameter counts per module");
    pm->add_option("--ckpt", params_ckpt);

    Export ex;
    auto* xc = app.add_subcommand("export-features", "Dump enhanced mask features");
    xc->add_option("--ckpt", ex.ckpt);
    xc->add_option("--manifest", ex.manifest)->required();
    xc->add_option("--prompt", ex.prompt)->check(CLI::IsMember({"box", "point"}));
    xc->add_option("--out", ex.out)->required();

    Serve sv;
    auto* svc = app.add_subcommand("serve", "HTTP inference service");
    svc->add_option("--ckpt", sv.ckpt);
    svc->add_option("--frames", sv.frames)->required();
    svc->add_option("--host", sv.host);
    svc->add_option("--port", sv.port);

    if (argc > 1 && argv[1][0] != '-') {
        const std::string name = argv[1];
        bool known = false;
        for (const auto* s : app.get_subcommands({})) known = known || s->get_name() == name;
        if (!known) {
            err << "seal: unknown subcommand '" << name << "'\n" << app.help();
            return 2;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "seal: " << e.what() << '\n';
        if (app.get_subcommands().empty()) err << app.help();
        return 2;
    }

    try {
        if (*sc) return do_synth(synth, out);
        if (*vc) return do_voxelize(vox, out);
        if (*gc) return do_build_guidance(bg, out);
        if (*tc) return do_train(tr, out);
        if (*ec) return do_eval(ev, out);
        if (*ic) return do_infer(inf, out);
        if (*pc) return do_profile(pr, out);
        if (*pm) return do_params(params_ckpt, out);
        if (*xc) return do_export(ex, out);
        if (*svc) return do_serve(sv, out);
    } catch (const Error& e) {
        err << "seal: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const nlohmann::json::exception& e) {
        err << "seal: malformed JSON: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "seal: " << e.what() << '\n';
        return 1;
    }
    err << app.help();
    return 2;
}

}  // namespace seal::cli
