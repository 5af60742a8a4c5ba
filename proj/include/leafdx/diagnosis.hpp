#pragma once

// End-to-end diagnosis: leaf extraction, lesion patches, per-patch class
// probabilities and their aggregation into a ranked report.

#include "leafdx/colour_calibration.hpp"
#include "leafdx/leaf_segmentation.hpp"
#include "leafdx/lesion_detection.hpp"
#include "leafdx/svm.hpp"

#include <optional>
#include <string>
#include <vector>

namespace leafdx::dx {

enum class AreaScale { Small, Large };

struct DiseaseEntry {
    std::string id;
    std::string name;
    std::string symptoms;
    std::string management;
    std::string reference_image;
    AreaScale area_scale = AreaScale::Small;

    friend bool operator==(const DiseaseEntry&, const DiseaseEntry&) = default;
};

struct DiseaseCatalog {
    std::vector<DiseaseEntry> entries;  // entry k describes model class k

    std::size_t size() const { return entries.size(); }
    /// Index of an entry by id, or -1.
    int index_of(const std::string& id) const;
    /// Throws unless the ids equal the model's class names in order.
    void check_model(const svm::SvmModel& model) const;

    /// The six mango pathologies with placeholder advisory text.
    static DiseaseCatalog standard();
    friend bool operator==(const DiseaseCatalog&, const DiseaseCatalog&) = default;
};

struct PipelineOptions {
    int max_side = 600;
    std::optional<calib::ColourTransform> transform;  // applied when set
    std::optional<calib::ChartSpec> chart;            // calibrate from the image when set
    calib::TransformKind chart_fit = calib::TransformKind::Linear;
    bool denoise = false;
    int denoise_radius = 1;
    double small_area_penalty = 0.5;
    leaf::BackgroundOptions background;
    lesion::DetectionOptions detection;
};

struct RankedDisease {
    int class_index = 0;
    std::string id;
    double probability = 0.0;

    friend bool operator==(const RankedDisease&, const RankedDisease&) = default;
};

struct PatchResult {
    Rect bbox;
    bool large_region = false;
    std::vector<double> probabilities;

    friend bool operator==(const PatchResult&, const PatchResult&) = default;
};

struct LeafSummary {
    Rect bbox;
    std::size_t area = 0;
    double orientation = 0.0;

    friend bool operator==(const LeafSummary&, const LeafSummary&) = default;
};

struct DiagnosisReport {
    std::vector<RankedDisease> ranked;
    std::vector<PatchResult> per_patch;
    double severity = 0.0;
    bool any_large_region = false;
    bool no_lesions = false;
    LeafSummary leaf;
    int width = 0;  // working-resolution image size
    int height = 0;

    friend bool operator==(const DiagnosisReport&, const DiagnosisReport&) = default;
};

struct Aggregate {
    std::vector<double> probabilities;
    bool any_large = false;
};

/// Mean of patch vectors; when any patch is flagged large, small-scale classes
/// are multiplied by `penalty` and the result renormalised.
Aggregate aggregate(std::span<const std::vector<double>> per_patch, const std::vector<bool>& flags,
                    const DiseaseCatalog& catalog, double penalty = 0.5);

struct RankedAdvice {
    const DiseaseEntry* disease = nullptr;
    int class_index = 0;
    double probability = 0.0;
};

/// Descending probability, ties by catalog position.
std::vector<RankedAdvice> rank_and_describe(std::span<const double> p, const DiseaseCatalog& catalog);

/// Resized (and optionally corrected and denoised) working image.
struct PreparedImage {
    Raster image;
    double scale = 1.0;  // working / original
    std::optional<calib::ColourTransform> transform;
};

PreparedImage prepare(const Raster& img, const PipelineOptions& opts);

/// Strokes given in original-image pixels mapped into the working image.
leaf::StrokeSet scale_strokes(const leaf::StrokeSet& strokes, double scale);

/// Lesion detection, features, prediction and aggregation on an extracted leaf.
DiagnosisReport diagnose_leaf(const Raster& working, const leaf::LeafSegment& leaf,
                              const svm::SvmModel& model, const DiseaseCatalog& catalog,
                              const PipelineOptions& opts = {});

DiagnosisReport run_pipeline(const Raster& img, const leaf::StrokeSet& strokes,
                             const svm::SvmModel& model, const DiseaseCatalog& catalog,
                             const PipelineOptions& opts = {});

/// Rectangle spanned by two corner clicks, clamped to [min_side, max_side]
/// per side about its centre and kept inside the image.
Rect selection_rect(Point2 a, Point2 b, int width, int height, int min_side = 10,
                    int max_side = 25);

/// Class probabilities of a user-selected rectangle on the working image.
std::vector<double> reselect_patch(const Raster& working, const leaf::LeafSegment& leaf,
                                   Point2 corner_a, Point2 corner_b, const svm::SvmModel& model,
                                   const DiseaseCatalog& catalog);

}  // namespace leafdx::dx
