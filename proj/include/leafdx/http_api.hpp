#pragma once

// HTTP front end of the diagnosis service. Every endpoint decodes its inputs,
// makes the matching library call and encodes the result; sessions (saved
// transforms and extracted leaves) live in memory.
//
//   POST /api/v1/calibrate  multipart: image, [fit=linear|quadratic]
//   POST /api/v1/leaf       multipart: image, strokes, [transform_id]
//                           or leaf_id, strokes (refinement)
//   POST /api/v1/diagnose   multipart: image, strokes, [transform_id], [options]
//                           or leaf_id, [options]
//   POST /api/v1/reselect   JSON: {leaf_id, corner_a, corner_b}
//   GET  /api/v1/diseases[/{id}]
//   GET  /api/v1/health
//
// Strokes use the stroke document encoding, in original image pixels.
// Rectangles, reselect corners and masks are in working-image pixels.
// Errors come back as {"error": code, "message": text}.

#include "leafdx/colour_calibration.hpp"
#include "leafdx/diagnosis.hpp"
#include "leafdx/svm.hpp"

#include "httplib.h"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

namespace leafdx::api {

inline constexpr const char* kServiceVersion = "1.0.0";

/// Stable hex digest of a model's encoded form.
std::string model_fingerprint(const svm::SvmModel& model);

struct ServiceConfig {
    calib::ChartSpec chart = calib::ChartSpec::standard();
    dx::DiseaseCatalog catalog = dx::DiseaseCatalog::standard();
    dx::PipelineOptions pipeline;
    std::size_t max_sessions = 64;  // per store; oldest evicted first
};

/// Working-resolution leaf kept for refinement, diagnosis and reselection.
struct LeafSession {
    Raster working;
    leaf::LeafSegment segment;
    double scale = 1.0;
};

class DiagnosisService {
public:
    DiagnosisService(ServiceConfig config, std::shared_ptr<const svm::SvmModel> model);

    /// Atomic replacement; throws unless the model matches the catalog.
    void swap_model(std::shared_ptr<const svm::SvmModel> model);
    std::shared_ptr<const svm::SvmModel> model() const;
    std::string model_id() const;

    const ServiceConfig& config() const { return config_; }
    std::optional<LeafSession> leaf_session(const std::string& id) const;
    std::optional<calib::ColourTransform> stored_transform(const std::string& id) const;

    httplib::Server& http() { return server_; }

    /// Binds to `port` (0 picks a free one) and returns it, or -1.
    int bind(const std::string& host, int port = 0);
    /// Serves until stop(); call after bind().
    bool run();
    void stop();

private:
    std::pair<std::shared_ptr<const svm::SvmModel>, std::string> snapshot() const;
    void install_routes();
    std::string put_leaf(LeafSession s);
    std::string put_transform(calib::ColourTransform t);

    ServiceConfig config_;
    httplib::Server server_;

    mutable std::mutex model_mutex_;
    std::shared_ptr<const svm::SvmModel> model_;
    std::string model_id_;

    mutable std::mutex store_mutex_;
    std::uint64_t next_id_ = 1;
    std::map<std::string, std::shared_ptr<const LeafSession>> leaves_;
    std::map<std::string, calib::ColourTransform> transforms_;
};

}  // namespace leafdx::api
