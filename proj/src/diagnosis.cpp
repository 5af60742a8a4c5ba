#include "leafdx/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace leafdx::dx {

int DiseaseCatalog::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].id == id) return static_cast<int>(i);
    return -1;
}

void DiseaseCatalog::check_model(const svm::SvmModel& model) const {
    if (entries.size() != model.class_names.size())
        throw Error(ErrorCode::InvalidArgument, "catalog and model disagree on the class count");
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].id != model.class_names[i])
            throw Error(ErrorCode::InvalidArgument,
                        "catalog entry '" + entries[i].id + "' does not match model class '" +
                            model.class_names[i] + "'");
}

DiseaseCatalog DiseaseCatalog::standard() {
    DiseaseCatalog c;
    c.entries = {
        {"anthracnose", "Anthracnose",
         "Dark brown to black sunken spots, often ringed by a yellow halo, that may merge into "
         "blotches.",
         "Prune and burn infected shoots. Apply a copper-based fungicide before flowering and "
         "repeat in wet weather.",
         "images/anthracnose.png", AreaScale::Small},
        {"gall_flies", "Gall flies",
         "Small raised reddish or purple galls scattered over the leaf blade.",
         "Collect and destroy galled leaves. Spray a systemic insecticide at new flush.",
         "images/gall_flies.png", AreaScale::Small},
        {"grey_leaf_spot", "Grey leaf spot",
         "Grey-brown spots with a darker margin, usually starting at the leaf tip or edge.",
         "Remove fallen leaves and spray a protective fungicide when spots first appear.",
         "images/grey_leaf_spot.png", AreaScale::Small},
        {"red_rust", "Red-rust",
         "Rusty orange velvety spots, mostly on the upper leaf surface.",
         "Spray a copper oxychloride suspension and improve canopy airflow.",
         "images/red_rust.png", AreaScale::Small},
        {"powdery_mildew", "Powdery mildew",
         "White powdery growth spreading across large areas of young leaves.",
         "Dust wettable sulphur or spray a systemic fungicide at panicle emergence.",
         "images/powdery_mildew.png", AreaScale::Large},
        {"sooty_mould", "Sooty mould",
         "Black papery coating over much of the leaf, growing on honeydew from sap-sucking "
         "insects.",
         "Control the sucking insects, then wash leaves with a starch or mild soap spray.",
         "images/sooty_mould.png", AreaScale::Large},
    };
    return c;
}

Aggregate aggregate(std::span<const std::vector<double>> per_patch, const std::vector<bool>& flags,
                    const DiseaseCatalog& catalog, double penalty) {
    if (per_patch.empty()) throw Error(ErrorCode::InvalidArgument, "aggregate: no patches");
    if (flags.size() != per_patch.size())
        throw Error(ErrorCode::DimensionMismatch, "aggregate: one flag per patch required");
    const std::size_t K = catalog.size();
    Aggregate out;
    out.probabilities.assign(K, 0.0);
    for (const auto& v : per_patch) {
        if (v.size() != K) throw Error(ErrorCode::DimensionMismatch, "aggregate: vector length != K");
        for (std::size_t k = 0; k < K; ++k) out.probabilities[k] += v[k];
    }
    for (auto& p : out.probabilities) p /= static_cast<double>(per_patch.size());
    out.any_large = std::find(flags.begin(), flags.end(), true) != flags.end();
    if (out.any_large) {
        for (std::size_t k = 0; k < K; ++k)
            if (catalog.entries[k].area_scale == AreaScale::Small) out.probabilities[k] *= penalty;
    }
    const double total = std::accumulate(out.probabilities.begin(), out.probabilities.end(), 0.0);
    if (total > 0)
        for (auto& p : out.probabilities) p /= total;
    return out;
}

std::vector<RankedAdvice> rank_and_describe(std::span<const double> p, const DiseaseCatalog& catalog) {
    if (p.size() != catalog.size())
        throw Error(ErrorCode::DimensionMismatch, "probability vector does not match the catalog");
    std::vector<RankedAdvice> out;
    for (std::size_t k = 0; k < p.size(); ++k)
        out.push_back({&catalog.entries[k], static_cast<int>(k), p[k]});
    std::stable_sort(out.begin(), out.end(), [](const RankedAdvice& a, const RankedAdvice& b) {
        return a.probability > b.probability;
    });
    return out;
}

PreparedImage prepare(const Raster& img, const PipelineOptions& opts) {
    PreparedImage out;
    if (img.channels() != 3) throw Error(ErrorCode::InvalidArgument, "diagnosis needs an RGB image");
    const int longest = std::max(img.width(), img.height());
    out.image = resize_max_side(img, opts.max_side);
    out.scale = static_cast<double>(std::max(out.image.width(), out.image.height())) / longest;
    if (opts.transform) {
        out.transform = opts.transform;
    } else if (opts.chart) {
        out.transform = calib::calibrate(out.image, *opts.chart, opts.chart_fit).transform;
    }
    if (out.transform) out.image = calib::apply_transform(out.image, *out.transform);
    if (opts.denoise) out.image = mean_filter(out.image, opts.denoise_radius);
    return out;
}

leaf::StrokeSet scale_strokes(const leaf::StrokeSet& strokes, double scale) {
    leaf::StrokeSet out = strokes;
    if (scale == 1.0) return out;
    for (auto& s : out.strokes) {
        for (auto& p : s.points) {
            p.x *= scale;
            p.y *= scale;
        }
        s.radius = std::max(1.0, s.radius * scale);
    }
    return out;
}

namespace {

DiagnosisReport uniform_report(const DiseaseCatalog& catalog) {
    DiagnosisReport r;
    const std::vector<double> p(catalog.size(), 1.0 / static_cast<double>(catalog.size()));
    for (const auto& a : rank_and_describe(p, catalog))
        r.ranked.push_back({a.class_index, a.disease->id, a.probability});
    r.no_lesions = true;
    return r;
}

}  // namespace

DiagnosisReport diagnose_leaf(const Raster& working, const leaf::LeafSegment& leaf,
                              const svm::SvmModel& model, const DiseaseCatalog& catalog,
                              const PipelineOptions& opts) {
    catalog.check_model(model);
    const lesion::LesionMap lm = lesion::build_affected_mask(working, leaf, opts.detection);
    const auto patches = lesion::tile_patches(lm, opts.detection);

    DiagnosisReport report;
    if (patches.empty()) {
        report = uniform_report(catalog);
    } else {
        std::vector<std::vector<double>> probs;
        std::vector<bool> flags;
        for (const auto& p : patches) {
            const auto v = features::patch_features(working, p.bbox);
            probs.push_back(svm::predict_proba(model, v));
            flags.push_back(p.large_region_label);
            report.per_patch.push_back({p.bbox, p.large_region_label, probs.back()});
        }
        const Aggregate agg = aggregate(probs, flags, catalog, opts.small_area_penalty);
        for (const auto& a : rank_and_describe(agg.probabilities, catalog))
            report.ranked.push_back({a.class_index, a.disease->id, a.probability});
        report.any_large_region = agg.any_large;
        report.severity = lesion::compute_severity(lm, leaf);
    }
    report.leaf = {leaf.bbox, leaf.area, leaf.orientation};
    report.width = working.width();
    report.height = working.height();
    return report;
}

DiagnosisReport run_pipeline(const Raster& img, const leaf::StrokeSet& strokes,
                             const svm::SvmModel& model, const DiseaseCatalog& catalog,
                             const PipelineOptions& opts) {
    catalog.check_model(model);
    const PreparedImage prep = prepare(img, opts);
    const leaf::LeafSegment seg =
        leaf::segment_leaf(prep.image, scale_strokes(strokes, prep.scale), opts.background);
    return diagnose_leaf(prep.image, seg, model, catalog, opts);
}

Rect selection_rect(Point2 a, Point2 b, int width, int height, int min_side, int max_side) {
    const int x0 = static_cast<int>(std::lround(std::min(a.x, b.x)));
    const int x1 = static_cast<int>(std::lround(std::max(a.x, b.x)));
    const int y0 = static_cast<int>(std::lround(std::min(a.y, b.y)));
    const int y1 = static_cast<int>(std::lround(std::max(a.y, b.y)));
    const int w = x1 - x0, h = y1 - y0;
    if (w < 1 || h < 1) throw Error(ErrorCode::DegenerateRectangle, "selection has zero area");
    if (x1 <= 0 || y1 <= 0 || x0 >= width || y0 >= height)
        throw Error(ErrorCode::DegenerateRectangle, "selection lies outside the image");
    const int nw = std::min(std::clamp(w, min_side, max_side), width);
    const int nh = std::min(std::clamp(h, min_side, max_side), height);
    Rect r{x0 + (w - nw) / 2, y0 + (h - nh) / 2, nw, nh};
    r.x = std::clamp(r.x, 0, width - r.w);
    r.y = std::clamp(r.y, 0, height - r.h);
    return r;
}

std::vector<double> reselect_patch(const Raster& working, const leaf::LeafSegment& leaf,
                                   Point2 corner_a, Point2 corner_b, const svm::SvmModel& model,
                                   const DiseaseCatalog& catalog) {
    catalog.check_model(model);
    if (leaf.mask.width() != working.width() || leaf.mask.height() != working.height())
        throw Error(ErrorCode::DimensionMismatch, "leaf does not match the image");
    const Rect r = selection_rect(corner_a, corner_b, working.width(), working.height());
    return svm::predict_proba(model, features::patch_features(working, r));
}

}  // namespace leafdx::dx
