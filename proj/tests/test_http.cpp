#include "leafdx/http_api.hpp"
#include "leafdx/image_io.hpp"
#include "leafdx/lesion_detection.hpp"
#include "leafdx/serialization.hpp"
#include "leafdx/synthetic.hpp"

#include "json.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <thread>

using namespace leafdx;
using json = nlohmann::json;

namespace {

std::shared_ptr<const svm::SvmModel> train_model(int per_class, std::uint64_t seed, double c) {
    svm::LabeledDataset d;
    for (int k = 0; k < synth::kArchetypeCount; ++k)
        d.class_names.push_back(synth::archetype_id(synth::Archetype(k)));
    for (const auto& s : synth::harvest_patches(per_class, seed)) {
        d.vectors.push_back(
            features::assemble(s.patch, features::elliptical_mask(s.patch.height(), s.patch.width())));
        d.labels.push_back(s.label);
    }
    return std::make_shared<const svm::SvmModel>(svm::train_scaled(d, c, 1.0 / 128));
}

std::string bytes_string(const io::Bytes& b) { return std::string(b.begin(), b.end()); }

std::string b64(const io::Bytes& b) { return httplib::detail::base64_encode(bytes_string(b)); }

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

BinaryMask mask_from_b64(const std::string& s) {
    std::string raw;
    int acc = 0, bits = 0;
    for (char c : s) {
        const auto pos = kAlphabet.find(c);
        if (pos == std::string_view::npos) continue;
        acc = (acc << 6) | static_cast<int>(pos);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            raw.push_back(static_cast<char>((acc >> bits) & 0xff));
        }
    }
    const auto* p = reinterpret_cast<const std::uint8_t*>(raw.data());
    return io::decode_mask_png(std::span<const std::uint8_t>(p, raw.size()));
}

json envelope_body(const std::string& doc, const char* key) { return json::parse(doc).at(key); }

class Server {
public:
    explicit Server(std::shared_ptr<const svm::SvmModel> model, api::ServiceConfig cfg = {})
        : service(std::move(cfg), std::move(model)) {
        port = service.bind("127.0.0.1", 0);
        thread_ = std::thread([this] { service.run(); });
        while (!service.http().is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(120, 0);
    }
    ~Server() {
        service.stop();
        thread_.join();
    }

    json get(const std::string& path, int expect = 200) {
        auto r = client->Get(path);
        EXPECT_TRUE(r);
        if (!r) return nullptr;
        EXPECT_EQ(r->status, expect) << r->body;
        return json::parse(r->body);
    }
    json post(const std::string& path, const httplib::MultipartFormDataItems& items, int expect = 200) {
        auto r = client->Post(path, items);
        EXPECT_TRUE(r);
        if (!r) return nullptr;
        EXPECT_EQ(r->status, expect) << r->body;
        return json::parse(r->body);
    }
    json post_json(const std::string& path, const std::string& body, int expect = 200) {
        auto r = client->Post(path, body, "application/json");
        EXPECT_TRUE(r);
        if (!r) return nullptr;
        EXPECT_EQ(r->status, expect) << r->body;
        return json::parse(r->body);
    }

    api::DiagnosisService service;
    int port = -1;
    std::unique_ptr<httplib::Client> client;

private:
    std::thread thread_;
};

httplib::MultipartFormData image_item(const Raster& img) {
    return {"image", bytes_string(io::encode_png(img)), "image.png", "image/png"};
}

httplib::MultipartFormData strokes_item(const leaf::StrokeSet& s) {
    return {"strokes", io::encode_strokes(s), "strokes.json", "application/json"};
}

httplib::MultipartFormData value_item(const std::string& name, const std::string& v) {
    return {name, v, "", ""};
}

class Http : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        model_ = new std::shared_ptr<const svm::SvmModel>(train_model(8, 700000, 8.0));
        synth::LeafSceneOptions o;
        o.width = 960;
        o.height = 720;
        o.stroke_radius = 8;
        scene_ = new synth::LeafScene(synth::render_leaf(synth::Archetype::RedRust, 31, o));
    }
    static void TearDownTestSuite() {
        delete model_;
        delete scene_;
    }
    static std::shared_ptr<const svm::SvmModel> model() { return *model_; }
    static const synth::LeafScene& scene() { return *scene_; }

    static std::shared_ptr<const svm::SvmModel>* model_;
    static synth::LeafScene* scene_;
};

std::shared_ptr<const svm::SvmModel>* Http::model_ = nullptr;
synth::LeafScene* Http::scene_ = nullptr;

}  // namespace

TEST_F(Http, HealthReportsModel) {
    Server s(model());
    const json h = s.get("/api/v1/health");
    EXPECT_EQ(h["status"], "ok");
    EXPECT_EQ(h["version"], api::kServiceVersion);
    EXPECT_EQ(h["format_version"], io::kFormatVersion);
    EXPECT_EQ(h["model_id"], api::model_fingerprint(*model()));
    EXPECT_EQ(h["classes"].get<std::vector<std::string>>(), model()->class_names);
}

TEST_F(Http, WithoutModel) {
    Server s(nullptr);
    const json h = s.get("/api/v1/health");
    EXPECT_TRUE(h["model_id"].is_null());
    EXPECT_TRUE(h["classes"].empty());
    const json d = s.post("/api/v1/diagnose", {image_item(scene().image), strokes_item(scene().strokes)}, 503);
    EXPECT_EQ(d["error"], "no_model");
    const json r = s.post_json("/api/v1/reselect", R"({"leaf_id":"x","corner_a":[0,0],"corner_b":[9,9]})", 503);
    EXPECT_EQ(r["error"], "no_model");
    // Segmentation does not need a model.
    s.post("/api/v1/leaf", {image_item(scene().image), strokes_item(scene().strokes)});
}

TEST_F(Http, DiseasesMatchCatalog) {
    Server s(model());
    const auto cat = dx::DiseaseCatalog::standard();
    const json list = s.get("/api/v1/diseases");
    EXPECT_EQ(list["diseases"], envelope_body(io::encode_catalog(cat), "diseases"));
    for (const auto& e : cat.entries) {
        const json one = s.get("/api/v1/diseases/" + e.id);
        EXPECT_EQ(one["id"], e.id);
        EXPECT_EQ(one["name"], e.name);
    }
    const json missing = s.get("/api/v1/diseases/blight", 404);
    EXPECT_EQ(missing["error"], "unknown_disease");
}

TEST_F(Http, LeafMatchesLibrary) {
    Server s(model());
    const json j = s.post("/api/v1/leaf", {image_item(scene().image), strokes_item(scene().strokes)});

    const dx::PipelineOptions opts;
    const dx::PreparedImage prep = dx::prepare(scene().image, opts);
    const leaf::LeafSegment seg =
        leaf::segment_leaf(prep.image, dx::scale_strokes(scene().strokes, prep.scale), opts.background);

    EXPECT_DOUBLE_EQ(j["scale"].get<double>(), prep.scale);
    EXPECT_LT(prep.scale, 1.0);
    EXPECT_EQ(j["width"], prep.image.width());
    EXPECT_EQ(j["height"], prep.image.height());
    EXPECT_EQ(j["area"], seg.area);
    EXPECT_DOUBLE_EQ(j["orientation"].get<double>(), seg.orientation);
    EXPECT_EQ(j["bbox"], json::array({seg.bbox.x, seg.bbox.y, seg.bbox.w, seg.bbox.h}));
    EXPECT_EQ(j["mask_png"], b64(io::encode_mask_png(seg.mask)));
    EXPECT_EQ(j["strokes"], envelope_body(io::encode_strokes(scene().strokes), "strokes"));

    const auto stored = s.service.leaf_session(j["leaf_id"]);
    ASSERT_TRUE(stored);
    EXPECT_EQ(stored->segment.mask, seg.mask);
    EXPECT_EQ(mask_from_b64(j["mask_png"]), seg.mask);
}

TEST_F(Http, StrokeWireFormatIsAccepted) {
    Server s(model());
    // The client sends strokes exactly in this shape.
    json doc = {{"format", "leafdx.strokes"}, {"version", 1}, {"strokes", json::array()}};
    for (const auto& st : scene().strokes.strokes) {
        json pts = json::array();
        for (const auto& p : st.points) pts.push_back({p.x, p.y});
        doc["strokes"].push_back({{"label", "leaf"}, {"points", pts}, {"radius", st.radius}});
    }
    const json j = s.post("/api/v1/leaf", {image_item(scene().image), {"strokes", doc.dump(), "", ""}});
    EXPECT_EQ(j["strokes"], doc["strokes"]);
}

TEST_F(Http, RefineByLeafId) {
    Server s(model());
    const json first = s.post("/api/v1/leaf", {image_item(scene().image), strokes_item(scene().strokes)});
    const auto prev = s.service.leaf_session(first["leaf_id"]);
    ASSERT_TRUE(prev);

    // Original-image pixels: a background scribble across one end of the leaf.
    leaf::Stroke bg;
    bg.label = leaf::StrokeLabel::Background;
    const Rect b = prev->segment.bbox;
    const double inv = 1.0 / prev->scale;
    bg.points = {{(b.x + 2) * inv, (b.y + b.h / 2.0) * inv}, {(b.x + b.w / 6.0) * inv, (b.y + b.h / 2.0) * inv}};
    bg.radius = 10;
    const leaf::StrokeSet extra{{bg}};

    const json j = s.post("/api/v1/leaf", {value_item("leaf_id", first["leaf_id"]), strokes_item(extra)});
    EXPECT_NE(j["leaf_id"], first["leaf_id"]);
    const leaf::LeafSegment want =
        leaf::refine_with_labels(prev->working, prev->segment, dx::scale_strokes(extra, prev->scale));
    EXPECT_EQ(mask_from_b64(j["mask_png"]), want.mask);
    EXPECT_LT(want.area, prev->segment.area);

    const json bad = s.post("/api/v1/leaf", {value_item("leaf_id", "lf-missing"), strokes_item(extra)}, 404);
    EXPECT_EQ(bad["error"], "unknown_leaf");
}

TEST_F(Http, DiagnoseMatchesPipeline) {
    Server s(model());
    const auto cat = dx::DiseaseCatalog::standard();
    const json j = s.post("/api/v1/diagnose", {image_item(scene().image), strokes_item(scene().strokes)});
    const dx::DiagnosisReport want = dx::run_pipeline(scene().image, scene().strokes, *model(), cat);
    EXPECT_EQ(j["report"], envelope_body(io::encode_report(want), "report"));
    EXPECT_EQ(j["model_id"], api::model_fingerprint(*model()));

    ASSERT_EQ(j["advice"].size(), cat.size());
    for (std::size_t i = 0; i < want.ranked.size(); ++i) {
        EXPECT_EQ(j["advice"][i]["id"], want.ranked[i].id);
        EXPECT_EQ(j["advice"][i]["class_index"], want.ranked[i].class_index);
        EXPECT_DOUBLE_EQ(j["advice"][i]["probability"].get<double>(), want.ranked[i].probability);
        EXPECT_EQ(j["advice"][i]["name"], cat.entries[want.ranked[i].class_index].name);
    }

    const auto sess = s.service.leaf_session(j["leaf_id"]);
    ASSERT_TRUE(sess);
    const auto lm = lesion::build_affected_mask(sess->working, sess->segment, dx::PipelineOptions{}.detection);
    EXPECT_EQ(mask_from_b64(j["lesion_mask_png"]), lm.mask);

    // Same leaf by id gives the same report.
    const json again = s.post("/api/v1/diagnose", {value_item("leaf_id", j["leaf_id"])});
    EXPECT_EQ(again["report"], j["report"]);
}

TEST_F(Http, DiagnoseOptions) {
    Server s(model());
    const auto cat = dx::DiseaseCatalog::standard();
    const json leafj = s.post("/api/v1/leaf", {image_item(scene().image), strokes_item(scene().strokes)});
    const auto sess = s.service.leaf_session(leafj["leaf_id"]);
    ASSERT_TRUE(sess);
    dx::PipelineOptions opts;
    opts.small_area_penalty = 0.25;
    const json j = s.post("/api/v1/diagnose", {value_item("leaf_id", leafj["leaf_id"]),
                                               value_item("options", R"({"small_area_penalty":0.25})")});
    const auto want = dx::diagnose_leaf(sess->working, sess->segment, *model(), cat, opts);
    EXPECT_EQ(j["report"], envelope_body(io::encode_report(want), "report"));

    const json bad = s.post("/api/v1/diagnose", {value_item("leaf_id", leafj["leaf_id"]),
                                                 value_item("options", R"({"small_area_penalty":0})")},
                            400);
    EXPECT_EQ(bad["error"], "invalid_argument");
}

TEST_F(Http, ReselectMatchesLibrary) {
    Server s(model());
    const auto cat = dx::DiseaseCatalog::standard();
    const json leafj = s.post("/api/v1/leaf", {image_item(scene().image), strokes_item(scene().strokes)});
    const auto sess = s.service.leaf_session(leafj["leaf_id"]);
    ASSERT_TRUE(sess);
    const Rect bb = sess->segment.bbox;
    const Point2 a{bb.x + bb.w / 2.0 - 7, bb.y + bb.h / 2.0 - 9};
    const Point2 b{bb.x + bb.w / 2.0 + 8, bb.y + bb.h / 2.0 + 6};
    json body = {{"leaf_id", leafj["leaf_id"]}, {"corner_a", {a.x, a.y}}, {"corner_b", {b.x, b.y}}};
    const json j = s.post_json("/api/v1/reselect", body.dump());

    const auto p = dx::reselect_patch(sess->working, sess->segment, a, b, *model(), cat);
    const Rect r = dx::selection_rect(a, b, sess->working.width(), sess->working.height());
    EXPECT_EQ(j["rect"], json::array({r.x, r.y, r.w, r.h}));
    const auto got = j["probabilities"].get<std::vector<double>>();
    ASSERT_EQ(got.size(), p.size());
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_DOUBLE_EQ(got[k], p[k]);
    const auto ranked = dx::rank_and_describe(p, cat);
    for (std::size_t i = 0; i < ranked.size(); ++i) EXPECT_EQ(j["advice"][i]["id"], ranked[i].disease->id);

    body["leaf_id"] = "lf-none";
    EXPECT_EQ(s.post_json("/api/v1/reselect", body.dump(), 404)["error"], "unknown_leaf");
    EXPECT_EQ(s.post_json("/api/v1/reselect", "{not json", 400)["error"], "malformed_file");
    const json no_corners = {{"leaf_id", leafj["leaf_id"]}};
    EXPECT_EQ(s.post_json("/api/v1/reselect", no_corners.dump(), 400)["error"], "malformed_file");
    const json same = {{"leaf_id", leafj["leaf_id"]}, {"corner_a", {a.x, a.y}}, {"corner_b", {a.x, a.y}}};
    EXPECT_EQ(s.post_json("/api/v1/reselect", same.dump(), 400)["error"], "degenerate_rectangle");
}

TEST_F(Http, CalibrateStoresTransform) {
    Server s(model());
    const auto spec = calib::ChartSpec::standard();
    synth::ChartScene cs;
    calib::ColourTransform d = calib::ColourTransform::identity(calib::TransformKind::Linear);
    const int n = calib::term_count(calib::TransformKind::Linear);
    d.matrix[0] = 0.85;
    d.matrix[2 * n + 2] = 1.1;
    cs.distortion = d;
    const auto chart = synth::render_chart(spec, cs);
    const json j = s.post("/api/v1/calibrate", {image_item(chart.image)});

    const auto want = calib::calibrate(chart.image, spec, calib::TransformKind::Linear);
    EXPECT_EQ(j["transform"], envelope_body(io::encode_transform(want.transform), "transform"));
    EXPECT_EQ(j["corrected_png"], b64(io::encode_png(calib::apply_transform(chart.image, want.transform))));
    ASSERT_EQ(j["corners"].size(), 4u);
    const auto stored = s.service.stored_transform(j["transform_id"]);
    ASSERT_TRUE(stored);
    EXPECT_EQ(io::encode_transform(*stored), io::encode_transform(want.transform));

    // The stored transform is applied before segmentation and diagnosis.
    dx::PipelineOptions opts;
    opts.transform = *stored;
    const json dj = s.post("/api/v1/diagnose", {image_item(scene().image), strokes_item(scene().strokes),
                                                value_item("transform_id", j["transform_id"])});
    const auto rep = dx::run_pipeline(scene().image, scene().strokes, *model(), dx::DiseaseCatalog::standard(), opts);
    EXPECT_EQ(dj["report"], envelope_body(io::encode_report(rep), "report"));

    const json q = s.post("/api/v1/calibrate", {image_item(chart.image), value_item("fit", "quadratic")});
    EXPECT_EQ(q["transform"]["kind"], "quadratic");
    EXPECT_EQ(s.post("/api/v1/calibrate", {image_item(chart.image), value_item("fit", "cubic")}, 400)["error"],
              "invalid_argument");
    const json none = s.post("/api/v1/calibrate", {image_item(synth::render_clutter(400, 300, 5))}, 422);
    EXPECT_EQ(none["error"], "chart_not_found");
    EXPECT_EQ(s.post("/api/v1/leaf", {image_item(scene().image), strokes_item(scene().strokes),
                                      value_item("transform_id", "tf-none")},
                     404)["error"],
              "unknown_transform");
}

TEST_F(Http, RequestErrors) {
    Server s(model());
    EXPECT_EQ(s.post("/api/v1/leaf", {strokes_item(scene().strokes)}, 400)["error"], "missing_field");
    EXPECT_EQ(s.post("/api/v1/leaf", {image_item(scene().image)}, 400)["error"], "missing_field");
    EXPECT_EQ(s.post("/api/v1/leaf", {image_item(scene().image), {"strokes", "[1,2", "", ""}}, 400)["error"],
              "malformed_file");
    EXPECT_EQ(s.post("/api/v1/leaf", {{"image", "not an image", "x.png", "image/png"}, strokes_item(scene().strokes)},
                     400)["error"],
              "malformed_file");
    leaf::Stroke bg;
    bg.label = leaf::StrokeLabel::Background;
    bg.points = {{5, 5}};
    EXPECT_EQ(s.post("/api/v1/leaf", {image_item(scene().image), strokes_item({{bg}})}, 400)["error"],
              "no_leaf_stroke");
    json v2 = json::parse(io::encode_strokes(scene().strokes));
    v2["version"] = 2;
    EXPECT_EQ(s.post("/api/v1/leaf", {image_item(scene().image), {"strokes", v2.dump(), "", ""}}, 400)["error"],
              "version_mismatch");
    const json e = s.post("/api/v1/diagnose", {value_item("leaf_id", "lf-0")}, 404);
    EXPECT_EQ(e["error"], "unknown_leaf");
    EXPECT_TRUE(e["message"].is_string());
}

TEST_F(Http, HotSwapChangesModelId) {
    Server s(model());
    const std::string before = s.get("/api/v1/health")["model_id"];
    auto other = train_model(6, 710000, 4.0);
    s.service.swap_model(other);
    const std::string after = s.get("/api/v1/health")["model_id"];
    EXPECT_NE(before, after);
    EXPECT_EQ(after, api::model_fingerprint(*other));
    const json j = s.post("/api/v1/diagnose", {image_item(scene().image), strokes_item(scene().strokes)});
    EXPECT_EQ(j["model_id"], after);

    svm::SvmModel wrong = *other;
    std::swap(wrong.class_names[0], wrong.class_names[1]);
    EXPECT_THROW(s.service.swap_model(std::make_shared<const svm::SvmModel>(wrong)), Error);
    EXPECT_EQ(s.service.model_id(), after);
}

TEST_F(Http, OldestSessionsEvicted) {
    api::ServiceConfig cfg;
    cfg.max_sessions = 2;
    Server s(model(), cfg);
    std::vector<std::string> ids;
    for (int i = 0; i < 3; ++i)
        ids.push_back(s.post("/api/v1/leaf", {image_item(scene().image), strokes_item(scene().strokes)})["leaf_id"]);
    EXPECT_FALSE(s.service.leaf_session(ids[0]));
    EXPECT_TRUE(s.service.leaf_session(ids[1]));
    EXPECT_TRUE(s.service.leaf_session(ids[2]));
    EXPECT_EQ(s.post("/api/v1/diagnose", {value_item("leaf_id", ids[0])}, 404)["error"], "unknown_leaf");
}
