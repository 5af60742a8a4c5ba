#pragma once

// Versioned JSON documents for every persisted type. Each document carries
// "format" and "version"; decoders reject other formats as malformed and
// other versions with VersionMismatch. Doubles round-trip bit-exactly.

#include "leafdx/colour_calibration.hpp"
#include "leafdx/diagnosis.hpp"
#include "leafdx/leaf_segmentation.hpp"
#include "leafdx/svm.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace leafdx::io {

inline constexpr int kFormatVersion = 1;

std::string encode_chart_spec(const calib::ChartSpec& spec);
calib::ChartSpec decode_chart_spec(std::string_view text);

std::string encode_transform(const calib::ColourTransform& t);
calib::ColourTransform decode_transform(std::string_view text);

std::string encode_strokes(const leaf::StrokeSet& s);
leaf::StrokeSet decode_strokes(std::string_view text);

std::string encode_model(const svm::SvmModel& m);
svm::SvmModel decode_model(std::string_view text);

std::string encode_catalog(const dx::DiseaseCatalog& c);
dx::DiseaseCatalog decode_catalog(std::string_view text);

std::string encode_report(const dx::DiagnosisReport& r);
dx::DiagnosisReport decode_report(std::string_view text);

std::string encode_cv_report(const svm::CvReport& r);
svm::CvReport decode_cv_report(std::string_view text);

/// Training set on disk: one directory of lesion-patch PNGs per class next
/// to a labels.json listing the class names in model order.
struct DatasetManifest {
    std::vector<std::string> classes;
};

std::string encode_manifest(const DatasetManifest& m);
DatasetManifest decode_manifest(std::string_view text);

/// Features of every PNG under <root>/<class>/ (sorted by file name), with
/// the elliptical mask over the whole patch.
svm::LabeledDataset load_dataset(const std::filesystem::path& root,
                                 const std::filesystem::path& manifest);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace leafdx::io
