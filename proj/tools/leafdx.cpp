#include "leafdx/diagnosis.hpp"
#include "leafdx/http_api.hpp"
#include "leafdx/image_io.hpp"
#include "leafdx/serialization.hpp"
#include "leafdx/synthetic.hpp"

#include "CLI11.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <thread>

using namespace leafdx;
namespace fs = std::filesystem;

namespace {

calib::ChartSpec load_chart(const std::string& path) {
    return path.empty() ? calib::ChartSpec::standard() : io::decode_chart_spec(io::read_text(path));
}

dx::DiseaseCatalog load_catalog(const std::string& path) {
    return path.empty() ? dx::DiseaseCatalog::standard() : io::decode_catalog(io::read_text(path));
}

calib::TransformKind parse_fit(const std::string& s) {
    return s == "quadratic" ? calib::TransformKind::Quadratic : calib::TransformKind::Linear;
}

const CLI::IsMember kFits({"linear", "quadratic"});

std::atomic<bool> g_stop{false};
api::DiagnosisService* g_service = nullptr;

void on_signal(int) {
    g_stop = true;
    if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leaf disease diagnosis from photographs"};
    app.require_subcommand(1);

    // calibrate
    std::string cal_image, cal_chart, cal_fit = "linear", cal_out = "transform.json", cal_png;
    auto* cal = app.add_subcommand("calibrate", "Fit a colour transform from a chart photo");
    cal->add_option("image", cal_image, "Photo showing the chart")->required()->check(CLI::ExistingFile);
    cal->add_option("--chart", cal_chart, "Chart spec (default: built-in)")->check(CLI::ExistingFile);
    cal->add_option("--fit", cal_fit, "linear or quadratic")->check(kFits);
    cal->add_option("-o,--out", cal_out, "Transform file");
    cal->add_option("--corrected", cal_png, "Write the corrected image here");

    // train
    std::string tr_dir, tr_labels, tr_model = "model.json", tr_cv;
    int tr_folds = 5;
    std::uint64_t tr_seed = 42;
    double tr_C = 0.0, tr_gamma = 0.0;
    auto* tr = app.add_subcommand("train", "Train the classifier from a patch dataset");
    tr->add_option("dataset", tr_dir, "Directory with one folder per class")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--labels", tr_labels, "Class manifest (default: <dataset>/labels.json)");
    tr->add_option("-o,--out", tr_model, "Model file");
    tr->add_option("--cv-report", tr_cv, "Cross-validation report file");
    tr->add_option("--folds", tr_folds, "Cross-validation folds")->check(CLI::Range(2, 20));
    tr->add_option("--seed", tr_seed, "Fold assignment seed");
    tr->add_option("--C", tr_C, "Skip the grid search and use this C")->check(CLI::PositiveNumber);
    tr->add_option("--gamma", tr_gamma, "Skip the grid search and use this gamma")->check(CLI::PositiveNumber);

    // diagnose
    std::string dg_image, dg_strokes, dg_model, dg_catalog, dg_transform, dg_chart, dg_fit = "linear",
                dg_out;
    bool dg_denoise = false;
    double dg_penalty = 0.5;
    auto* dg = app.add_subcommand("diagnose", "Diagnose a leaf photo");
    dg->add_option("image", dg_image, "Leaf photo")->required()->check(CLI::ExistingFile);
    dg->add_option("--strokes", dg_strokes, "Stroke file")->required()->check(CLI::ExistingFile);
    dg->add_option("--model", dg_model, "Model file")->required()->check(CLI::ExistingFile);
    dg->add_option("--catalog", dg_catalog, "Disease catalog (default: built-in)")->check(CLI::ExistingFile);
    auto* dg_t = dg->add_option("--transform", dg_transform, "Saved colour transform")->check(CLI::ExistingFile);
    dg->add_option("--chart", dg_chart, "Calibrate from a chart in the photo")->excludes(dg_t)->check(CLI::ExistingFile);
    dg->add_flag("--use-chart", "Calibrate from the built-in chart in the photo")->excludes(dg_t);
    dg->add_option("--fit", dg_fit, "Chart fit: linear or quadratic")->check(kFits);
    dg->add_flag("--denoise", dg_denoise, "Mean-filter before segmentation");
    dg->add_option("--small-area-penalty", dg_penalty, "Factor for small-area diseases")->check(CLI::Range(0.0, 1.0));
    dg->add_option("-o,--out", dg_out, "Report file (default: stdout)");

    // serve
    std::string sv_model, sv_catalog, sv_chart, sv_host = "127.0.0.1";
    int sv_port = 8080;
    double sv_poll = 2.0;
    auto* sv = app.add_subcommand("serve", "Run the HTTP service");
    sv->add_option("--model", sv_model, "Model file, reloaded when it changes")->check(CLI::ExistingFile);
    sv->add_option("--catalog", sv_catalog, "Disease catalog (default: built-in)")->check(CLI::ExistingFile);
    sv->add_option("--chart", sv_chart, "Chart spec (default: built-in)")->check(CLI::ExistingFile);
    sv->add_option("--host", sv_host, "Bind address");
    sv->add_option("--port", sv_port, "Port, 0 for any")->check(CLI::Range(0, 65535));
    sv->add_option("--poll", sv_poll, "Model reload check interval in seconds")->check(CLI::PositiveNumber);

    // synth
    auto* sy = app.add_subcommand("synth", "Render synthetic inputs");
    sy->require_subcommand(1);
    std::string sy_out;
    std::uint64_t sy_seed = 1;
    int sy_per_class = 120;
    std::string sy_archetype = "anthracnose";
    auto* sy_ds = sy->add_subcommand("dataset", "Lesion patch dataset with a labels manifest");
    sy_ds->add_option("out", sy_out, "Output directory")->required();
    sy_ds->add_option("--per-class", sy_per_class, "Patches per class")->check(CLI::PositiveNumber);
    sy_ds->add_option("--seed", sy_seed, "Leaf seed base");
    std::string sy_strokes;
    auto* sy_leaf = sy->add_subcommand("leaf", "Leaf photo plus its stroke file");
    sy_leaf->add_option("out", sy_out, "Output PNG")->required();
    sy_leaf->add_option("--archetype", sy_archetype, "Disease id or 'healthy'");
    sy_leaf->add_option("--seed", sy_seed, "Scene seed");
    sy_leaf->add_option("--strokes", sy_strokes, "Stroke file (default: <out>.strokes.json)");
    std::string sy_chart;
    auto* sy_ch = sy->add_subcommand("chart", "Chart photo");
    sy_ch->add_option("out", sy_out, "Output PNG")->required();
    sy_ch->add_option("--seed", sy_seed, "Scene seed");
    sy_ch->add_option("--chart", sy_chart, "Chart spec (default: built-in)")->check(CLI::ExistingFile);
    auto* sy_def = sy->add_subcommand("defaults", "Write the built-in chart spec and catalog");
    sy_def->add_option("out", sy_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cal) {
            const Raster img = io::read_image(cal_image);
            const auto res = calib::calibrate(img, load_chart(cal_chart), parse_fit(cal_fit));
            io::write_text(cal_out, io::encode_transform(res.transform));
            if (!cal_png.empty()) io::write_png(cal_png, calib::apply_transform(img, res.transform));
            std::printf("residual rms %.5f\n", res.transform.residual_rms);
        } else if (*tr) {
            const fs::path labels = tr_labels.empty() ? fs::path(tr_dir) / "labels.json" : fs::path(tr_labels);
            const svm::LabeledDataset raw = io::load_dataset(tr_dir, labels);
            raw.validate(static_cast<std::size_t>(tr_folds));
            const auto scaling = features::fit_scaling(raw.vectors);
            svm::LabeledDataset scaled = raw;
            for (auto& v : scaled.vectors) v = features::apply_scaling(v, scaling);
            double C = tr_C, gamma = tr_gamma;
            if (C <= 0.0 || gamma <= 0.0) {
                const auto rep = svm::grid_search_cv(scaled, svm::GridSpec::standard(), tr_folds, tr_seed);
                if (!tr_cv.empty()) io::write_text(tr_cv, io::encode_cv_report(rep));
                if (C <= 0.0) C = rep.best_C;
                if (gamma <= 0.0) gamma = rep.best_gamma;
                std::printf("cv accuracy %.4f at C=%g gamma=%g\n", rep.best_accuracy, rep.best_C, rep.best_gamma);
            }
            const auto model = svm::train_multiclass(scaled, C, gamma, scaling);
            io::write_text(tr_model, io::encode_model(model));
            std::printf("trained %d classes on %zu patches\n", model.class_count(), raw.vectors.size());
        } else if (*dg) {
            const Raster img = io::read_image(dg_image);
            const auto strokes = io::decode_strokes(io::read_text(dg_strokes));
            const auto model = io::decode_model(io::read_text(dg_model));
            const auto catalog = load_catalog(dg_catalog);
            dx::PipelineOptions opts;
            if (!dg_transform.empty()) opts.transform = io::decode_transform(io::read_text(dg_transform));
            if (!dg_chart.empty()) opts.chart = io::decode_chart_spec(io::read_text(dg_chart));
            if (dg->count("--use-chart") > 0) opts.chart = calib::ChartSpec::standard();
            opts.chart_fit = parse_fit(dg_fit);
            opts.denoise = dg_denoise;
            opts.small_area_penalty = dg_penalty;
            const auto report = dx::run_pipeline(img, strokes, model, catalog, opts);
            const std::string text = io::encode_report(report);
            if (dg_out.empty()) {
                std::cout << text << "\n";
            } else {
                io::write_text(dg_out, text);
                if (report.no_lesions) std::printf("no lesions found\n");
                for (std::size_t i = 0; i < report.ranked.size() && i < 3; ++i)
                    std::printf("%zu. %-16s %.3f\n", i + 1, report.ranked[i].id.c_str(), report.ranked[i].probability);
                std::printf("severity %.3f\n", report.severity);
            }
        } else if (*sv) {
            api::ServiceConfig cfg;
            cfg.catalog = load_catalog(sv_catalog);
            cfg.chart = load_chart(sv_chart);
            std::shared_ptr<const svm::SvmModel> model;
            if (!sv_model.empty())
                model = std::make_shared<const svm::SvmModel>(io::decode_model(io::read_text(sv_model)));
            api::DiagnosisService service(std::move(cfg), model);
            const int port = service.bind(sv_host, sv_port);
            if (port < 0) throw Error(ErrorCode::IoError, "cannot bind " + sv_host + ":" + std::to_string(sv_port));
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::thread watcher;
            if (!sv_model.empty()) {
                watcher = std::thread([&] {
                    auto stamp = fs::last_write_time(sv_model);
                    const auto step = std::chrono::milliseconds(100);
                    auto waited = std::chrono::milliseconds(0);
                    while (!g_stop) {
                        std::this_thread::sleep_for(step);
                        waited += step;
                        if (waited.count() < sv_poll * 1000.0) continue;
                        waited = std::chrono::milliseconds(0);
                        std::error_code ec;
                        const auto now = fs::last_write_time(sv_model, ec);
                        if (ec || now == stamp) continue;
                        try {
                            service.swap_model(std::make_shared<const svm::SvmModel>(
                                io::decode_model(io::read_text(sv_model))));
                            stamp = now;
                            std::fprintf(stderr, "reloaded model %s\n", service.model_id().c_str());
                        } catch (const std::exception& e) {
                            std::fprintf(stderr, "model reload failed: %s\n", e.what());
                        }
                    }
                });
            }
            std::printf("listening on %s:%d\n", sv_host.c_str(), port);
            std::fflush(stdout);
            service.run();
            g_stop = true;
            if (watcher.joinable()) watcher.join();
            g_service = nullptr;
        } else if (*sy_ds) {
            io::DatasetManifest manifest;
            for (int c = 0; c < synth::kArchetypeCount; ++c)
                manifest.classes.push_back(synth::archetype_id(synth::Archetype(c)));
            std::vector<int> counts(manifest.classes.size(), 0);
            for (const auto& s : synth::harvest_patches(sy_per_class, sy_seed)) {
                const fs::path dir = fs::path(sy_out) / manifest.classes[s.label];
                fs::create_directories(dir);
                char name[32];
                std::snprintf(name, sizeof name, "%05d.png", counts[s.label]++);
                io::write_png(dir / name, s.patch);
            }
            io::write_text(fs::path(sy_out) / "labels.json", io::encode_manifest(manifest));
            std::printf("wrote %d patches per class to %s\n", sy_per_class, sy_out.c_str());
        } else if (*sy_leaf) {
            std::optional<synth::Archetype> a;
            if (sy_archetype != "healthy") {
                for (int c = 0; c < synth::kArchetypeCount; ++c)
                    if (synth::archetype_id(synth::Archetype(c)) == sy_archetype) a = synth::Archetype(c);
                if (!a) throw Error(ErrorCode::InvalidArgument, "unknown archetype '" + sy_archetype + "'");
            }
            const auto scene = synth::render_leaf(a, sy_seed);
            io::write_png(sy_out, scene.image);
            io::write_text(sy_strokes.empty() ? sy_out + ".strokes.json" : sy_strokes,
                           io::encode_strokes(scene.strokes));
        } else if (*sy_ch) {
            const auto chart = synth::render_chart(load_chart(sy_chart), synth::random_chart_scene(sy_seed));
            io::write_png(sy_out, chart.image);
        } else if (*sy_def) {
            fs::create_directories(sy_out);
            io::write_text(fs::path(sy_out) / "chart_spec.json", io::encode_chart_spec(calib::ChartSpec::standard()));
            io::write_text(fs::path(sy_out) / "catalog.json", io::encode_catalog(dx::DiseaseCatalog::standard()));
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error (%s): %s\n", to_string(e.code()), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
