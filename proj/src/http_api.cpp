#include "leafdx/http_api.hpp"

#include "json_codec.hpp"
#include "leafdx/image_io.hpp"
#include "leafdx/lesion_detection.hpp"

#include <cstdio>

namespace leafdx::api {

using io::codec::json;

namespace {

std::string code_slug(ErrorCode c) {
    std::string s = to_string(c);
    for (char& ch : s)
        if (ch == ' ' || ch == '-' || ch == '/') ch = '_';
    return s;
}

int status_for(ErrorCode c) {
    switch (c) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::MalformedFile:
        case ErrorCode::VersionMismatch:
        case ErrorCode::DegenerateRectangle:
        case ErrorCode::DimensionMismatch:
        case ErrorCode::NoLeafStroke:
        case ErrorCode::ImageTooSmall:
            return 400;
        case ErrorCode::IoError:
            return 500;
        default:
            return 422;
    }
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
    send_json(res, {{"error", code}, {"message", msg}}, status);
}

struct HttpError {
    int status;
    std::string code;
    std::string message;
};

template <typename F>
void guard(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const HttpError& e) {
        send_error(res, e.status, e.code, e.message);
    } catch (const Error& e) {
        send_error(res, status_for(e.code()), code_slug(e.code()), e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, code_slug(ErrorCode::MalformedFile), e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

std::string b64(const io::Bytes& bytes) {
    return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

// A multipart field, whether sent as a file part or a plain value.
std::optional<std::string> field(const httplib::Request& req, const std::string& key) {
    if (req.has_file(key)) return req.get_file_value(key).content;
    if (req.has_param(key)) return req.get_param_value(key);
    return std::nullopt;
}

std::string require(const httplib::Request& req, const std::string& key) {
    auto v = field(req, key);
    if (!v) throw HttpError{400, "missing_field", "missing field '" + key + "'"};
    return *v;
}

Raster image_field(const httplib::Request& req) {
    const std::string data = require(req, "image");
    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
    return io::decode_image(std::span<const std::uint8_t>(p, data.size()));
}

leaf::StrokeSet strokes_field(const httplib::Request& req) {
    return io::decode_strokes(require(req, "strokes"));
}

calib::TransformKind fit_kind(const std::string& s) {
    if (s == "linear") return calib::TransformKind::Linear;
    if (s == "quadratic") return calib::TransformKind::Quadratic;
    throw HttpError{400, code_slug(ErrorCode::InvalidArgument), "fit must be linear or quadratic"};
}

// Per-request overrides: {"denoise", "denoise_radius", "small_area_penalty"}.
dx::PipelineOptions with_options(dx::PipelineOptions opts, const std::optional<std::string>& text) {
    if (!text || text->empty()) return opts;
    const json j = io::codec::parse(*text);
    if (!j.is_object()) throw HttpError{400, code_slug(ErrorCode::MalformedFile), "options must be an object"};
    opts.denoise = j.value("denoise", opts.denoise);
    opts.denoise_radius = j.value("denoise_radius", opts.denoise_radius);
    opts.small_area_penalty = j.value("small_area_penalty", opts.small_area_penalty);
    if (opts.denoise_radius < 1 || !(opts.small_area_penalty > 0.0 && opts.small_area_penalty <= 1.0))
        throw HttpError{400, code_slug(ErrorCode::InvalidArgument), "option out of range"};
    return opts;
}

json leaf_json(const std::string& id, const LeafSession& s) {
    return {{"leaf_id", id},
            {"width", s.working.width()},
            {"height", s.working.height()},
            {"scale", s.scale},
            {"bbox", io::codec::rect_json(s.segment.bbox)},
            {"area", s.segment.area},
            {"orientation", s.segment.orientation},
            {"mask_png", b64(io::encode_mask_png(s.segment.mask))}};
}

json advice_json(std::span<const double> p, const dx::DiseaseCatalog& catalog) {
    json arr = json::array();
    for (const auto& a : dx::rank_and_describe(p, catalog)) {
        json e = io::codec::entry_json(*a.disease);
        e["class_index"] = a.class_index;
        e["probability"] = a.probability;
        arr.push_back(std::move(e));
    }
    return arr;
}

}  // namespace

std::string model_fingerprint(const svm::SvmModel& model) {
    const std::string text = io::encode_model(model);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DiagnosisService::DiagnosisService(ServiceConfig config, std::shared_ptr<const svm::SvmModel> model)
    : config_(std::move(config)) {
    config_.chart.validate();
    if (model) swap_model(std::move(model));
    install_routes();
}

void DiagnosisService::swap_model(std::shared_ptr<const svm::SvmModel> model) {
    if (!model) throw Error(ErrorCode::InvalidArgument, "null model");
    config_.catalog.check_model(*model);
    std::string id = model_fingerprint(*model);
    std::lock_guard lock(model_mutex_);
    model_ = std::move(model);
    model_id_ = std::move(id);
}

std::shared_ptr<const svm::SvmModel> DiagnosisService::model() const {
    std::lock_guard lock(model_mutex_);
    return model_;
}

std::string DiagnosisService::model_id() const {
    std::lock_guard lock(model_mutex_);
    return model_id_;
}

std::pair<std::shared_ptr<const svm::SvmModel>, std::string> DiagnosisService::snapshot() const {
    std::lock_guard lock(model_mutex_);
    return {model_, model_id_};
}

std::optional<LeafSession> DiagnosisService::leaf_session(const std::string& id) const {
    std::lock_guard lock(store_mutex_);
    auto it = leaves_.find(id);
    if (it == leaves_.end()) return std::nullopt;
    return *it->second;
}

std::optional<calib::ColourTransform> DiagnosisService::stored_transform(const std::string& id) const {
    std::lock_guard lock(store_mutex_);
    auto it = transforms_.find(id);
    if (it == transforms_.end()) return std::nullopt;
    return it->second;
}

std::string DiagnosisService::put_leaf(LeafSession s) {
    std::lock_guard lock(store_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "leaf-%08llu", static_cast<unsigned long long>(next_id_++));
    leaves_.emplace(buf, std::make_shared<const LeafSession>(std::move(s)));
    while (leaves_.size() > config_.max_sessions) leaves_.erase(leaves_.begin());
    return buf;
}

std::string DiagnosisService::put_transform(calib::ColourTransform t) {
    std::lock_guard lock(store_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "tf-%08llu", static_cast<unsigned long long>(next_id_++));
    transforms_.emplace(buf, std::move(t));
    while (transforms_.size() > config_.max_sessions) transforms_.erase(transforms_.begin());
    return buf;
}

int DiagnosisService::bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
}

bool DiagnosisService::run() { return server_.listen_after_bind(); }

void DiagnosisService::stop() { server_.stop(); }

void DiagnosisService::install_routes() {
    auto need_model = [this] {
        auto snap = snapshot();
        if (!snap.first) throw HttpError{503, "no_model", "no model loaded"};
        return snap;
    };
    auto need_leaf = [this](const std::string& id) {
        std::lock_guard lock(store_mutex_);
        auto it = leaves_.find(id);
        if (it == leaves_.end()) throw HttpError{404, "unknown_leaf", "unknown leaf id '" + id + "'"};
        return it->second;
    };
    auto with_transform = [this](const httplib::Request& req) {
        dx::PipelineOptions opts = config_.pipeline;
        if (auto id = field(req, "transform_id")) {
            auto t = stored_transform(*id);
            if (!t) throw HttpError{404, "unknown_transform", "unknown transform id '" + *id + "'"};
            opts.transform = *t;
        }
        return opts;
    };
    auto new_leaf = [this](const Raster& img, const leaf::StrokeSet& strokes,
                           const dx::PipelineOptions& opts) {
        dx::PreparedImage prep = dx::prepare(img, opts);
        LeafSession s;
        s.segment = leaf::segment_leaf(prep.image, dx::scale_strokes(strokes, prep.scale), opts.background);
        s.working = std::move(prep.image);
        s.scale = prep.scale;
        return s;
    };

    server_.Get("/api/v1/health", [this](const httplib::Request&, httplib::Response& res) {
        guard(res, [&] {
            const auto [m, id] = snapshot();
            json j = {{"status", "ok"},
                      {"version", kServiceVersion},
                      {"format_version", io::kFormatVersion},
                      {"model_id", m ? json(id) : json(nullptr)},
                      {"classes", m ? json(m->class_names) : json::array()}};
            send_json(res, j);
        });
    });

    server_.Get("/api/v1/diseases", [this](const httplib::Request&, httplib::Response& res) {
        guard(res, [&] {
            json arr = json::array();
            for (const auto& e : config_.catalog.entries) arr.push_back(io::codec::entry_json(e));
            send_json(res, {{"diseases", arr}});
        });
    });

    server_.Get(R"(/api/v1/diseases/([A-Za-z0-9_\-]+))",
                [this](const httplib::Request& req, httplib::Response& res) {
                    guard(res, [&] {
                        const std::string id = req.matches[1];
                        const int k = config_.catalog.index_of(id);
                        if (k < 0) throw HttpError{404, "unknown_disease", "unknown disease '" + id + "'"};
                        send_json(res, io::codec::entry_json(config_.catalog.entries[k]));
                    });
                });

    server_.Post("/api/v1/calibrate", [this](const httplib::Request& req, httplib::Response& res) {
        guard(res, [&] {
            const Raster img = image_field(req);
            const auto kind = fit_kind(field(req, "fit").value_or("linear"));
            const calib::CalibrationResult cal = calib::calibrate(img, config_.chart, kind);
            const Raster corrected = calib::apply_transform(img, cal.transform);
            json corners = json::array();
            for (const auto& p : cal.detection.corners) corners.push_back(io::codec::point_json(p));
            const std::string id = put_transform(cal.transform);
            send_json(res, {{"transform_id", id},
                            {"transform", io::codec::transform_json(cal.transform)},
                            {"corners", corners},
                            {"corrected_png", b64(io::encode_png(corrected))}});
        });
    });

    server_.Post("/api/v1/leaf", [=, this](const httplib::Request& req, httplib::Response& res) {
        guard(res, [&] {
            const leaf::StrokeSet strokes = strokes_field(req);
            LeafSession s;
            if (auto id = field(req, "leaf_id")) {
                auto prev = need_leaf(*id);
                s = *prev;
                s.segment = leaf::refine_with_labels(prev->working, prev->segment,
                                                     dx::scale_strokes(strokes, prev->scale));
            } else {
                s = new_leaf(image_field(req), strokes, with_transform(req));
            }
            json j = leaf_json("", s);
            j["leaf_id"] = put_leaf(s);
            j["strokes"] = io::codec::strokes_json(strokes);
            send_json(res, j);
        });
    });

    server_.Post("/api/v1/diagnose", [=, this](const httplib::Request& req, httplib::Response& res) {
        guard(res, [&] {
            const auto [m, model_id] = need_model();
            dx::PipelineOptions opts = with_options(with_transform(req), field(req, "options"));
            std::string id;
            std::shared_ptr<const LeafSession> s;
            if (auto lid = field(req, "leaf_id")) {
                id = *lid;
                s = need_leaf(id);
            } else {
                config_.catalog.check_model(*m);
                auto fresh = std::make_shared<const LeafSession>(
                    new_leaf(image_field(req), strokes_field(req), opts));
                id = put_leaf(*fresh);
                s = fresh;
            }
            const dx::DiagnosisReport r = dx::diagnose_leaf(s->working, s->segment, *m, config_.catalog, opts);
            std::vector<double> p(config_.catalog.size(), 0.0);
            for (const auto& d : r.ranked) p[static_cast<std::size_t>(d.class_index)] = d.probability;
            const lesion::LesionMap lm = lesion::build_affected_mask(s->working, s->segment, opts.detection);
            send_json(res, {{"leaf_id", id},
                            {"model_id", model_id},
                            {"report", io::codec::report_json(r)},
                            {"advice", advice_json(p, config_.catalog)},
                            {"lesion_mask_png", b64(io::encode_mask_png(lm.mask))}});
        });
    });

    server_.Post("/api/v1/reselect", [=, this](const httplib::Request& req, httplib::Response& res) {
        guard(res, [&] {
            const auto m = need_model().first;
            const json j = io::codec::parse(req.body);
            const auto s = need_leaf(j.at("leaf_id").get<std::string>());
            const Point2 a = io::codec::point_from(j.at("corner_a"));
            const Point2 b = io::codec::point_from(j.at("corner_b"));
            const auto p = dx::reselect_patch(s->working, s->segment, a, b, *m, config_.catalog);
            const Rect r = dx::selection_rect(a, b, s->working.width(), s->working.height());
            send_json(res, {{"rect", io::codec::rect_json(r)},
                            {"probabilities", p},
                            {"advice", advice_json(p, config_.catalog)}});
        });
    });
}

}  // namespace leafdx::api
