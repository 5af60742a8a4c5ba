#pragma once

// JSON value conversions shared by the file formats and the HTTP layer.

#include "leafdx/serialization.hpp"

#include "json.hpp"

namespace leafdx::io::codec {

using nlohmann::json;

json envelope(const char* format);
/// Throws MalformedFile for a foreign format and VersionMismatch for an
/// unknown version.
void check_envelope(const json& j, const char* format);
json parse(std::string_view text);

/// Runs `f`, mapping JSON access failures to MalformedFile.
template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::MalformedFile, std::string(what) + ": " + e.what());
    }
}

json rect_json(const Rect& r);
Rect rect_from(const json& j);
json point_json(const Point2& p);
Point2 point_from(const json& j);

json strokes_json(const leaf::StrokeSet& s);
leaf::StrokeSet strokes_from(const json& j);

json transform_json(const calib::ColourTransform& t);
calib::ColourTransform transform_from(const json& j);

json entry_json(const dx::DiseaseEntry& e);
dx::DiseaseEntry entry_from(const json& j);

json report_json(const dx::DiagnosisReport& r);
dx::DiagnosisReport report_from(const json& j);

json model_json(const svm::SvmModel& m);
svm::SvmModel model_from(const json& j);

}  // namespace leafdx::io::codec
