#include "leafdx/serialization.hpp"

#include "json_codec.hpp"
#include "leafdx/image_io.hpp"
#include "leafdx/lesion_features.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace leafdx::io {

namespace codec {

json envelope(const char* format) {
    json j = json::object();
    j["format"] = format;
    j["version"] = kFormatVersion;
    return j;
}

void check_envelope(const json& j, const char* format) {
    if (!j.is_object() || !j.contains("format") || !j["format"].is_string() ||
        j["format"].get<std::string>() != format)
        throw Error(ErrorCode::MalformedFile, std::string("not a ") + format + " document");
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw Error(ErrorCode::MalformedFile, "missing version");
    const int v = j["version"].get<int>();
    if (v != kFormatVersion)
        throw Error(ErrorCode::VersionMismatch,
                    std::string(format) + " version " + std::to_string(v) + " is not supported");
}

json parse(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedFile, std::string("invalid JSON: ") + e.what());
    }
}

json rect_json(const Rect& r) { return json::array({r.x, r.y, r.w, r.h}); }

Rect rect_from(const json& j) {
    if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::MalformedFile, "rect needs 4 values");
    return Rect{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

json point_json(const Point2& p) { return json::array({p.x, p.y}); }

Point2 point_from(const json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::MalformedFile, "point needs 2 values");
    return Point2{j[0].get<double>(), j[1].get<double>()};
}

json strokes_json(const leaf::StrokeSet& s) {
    json arr = json::array();
    for (const auto& st : s.strokes) {
        json pts = json::array();
        for (const auto& p : st.points) pts.push_back(point_json(p));
        arr.push_back({{"label", st.label == leaf::StrokeLabel::Leaf ? "leaf" : "background"},
                       {"radius", st.radius},
                       {"points", pts}});
    }
    return arr;
}

leaf::StrokeSet strokes_from(const json& j) {
    if (!j.is_array()) throw Error(ErrorCode::MalformedFile, "strokes must be an array");
    leaf::StrokeSet s;
    for (const auto& e : j) {
        leaf::Stroke st;
        const auto label = e.at("label").get<std::string>();
        if (label == "leaf")
            st.label = leaf::StrokeLabel::Leaf;
        else if (label == "background")
            st.label = leaf::StrokeLabel::Background;
        else
            throw Error(ErrorCode::MalformedFile, "unknown stroke label '" + label + "'");
        st.radius = e.value("radius", 1.0);
        if (!(st.radius > 0.0)) throw Error(ErrorCode::MalformedFile, "stroke radius must be positive");
        for (const auto& p : e.at("points")) st.points.push_back(point_from(p));
        if (st.points.empty()) throw Error(ErrorCode::MalformedFile, "stroke without points");
        s.strokes.push_back(std::move(st));
    }
    return s;
}

json transform_json(const calib::ColourTransform& t) {
    return {{"kind", t.kind == calib::TransformKind::Linear ? "linear" : "quadratic"},
            {"matrix", t.matrix},
            {"weights", t.fitted_weights.w},
            {"residual_rms", t.residual_rms}};
}

calib::ColourTransform transform_from(const json& j) {
    calib::ColourTransform t;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "linear")
        t.kind = calib::TransformKind::Linear;
    else if (kind == "quadratic")
        t.kind = calib::TransformKind::Quadratic;
    else
        throw Error(ErrorCode::MalformedFile, "unknown transform kind '" + kind + "'");
    t.matrix = j.at("matrix").get<std::vector<double>>();
    if (t.matrix.size() != static_cast<std::size_t>(3 * calib::term_count(t.kind)))
        throw Error(ErrorCode::MalformedFile, "transform matrix has the wrong size");
    t.fitted_weights.w = j.value("weights", std::vector<double>{});
    t.residual_rms = j.value("residual_rms", 0.0);
    return t;
}

json entry_json(const dx::DiseaseEntry& e) {
    return {{"id", e.id},
            {"name", e.name},
            {"symptoms", e.symptoms},
            {"management", e.management},
            {"reference_image", e.reference_image},
            {"area_scale", e.area_scale == dx::AreaScale::Small ? "small" : "large"}};
}

dx::DiseaseEntry entry_from(const json& j) {
    dx::DiseaseEntry e;
    e.id = j.at("id").get<std::string>();
    e.name = j.at("name").get<std::string>();
    e.symptoms = j.value("symptoms", std::string{});
    e.management = j.value("management", std::string{});
    e.reference_image = j.value("reference_image", std::string{});
    const auto scale = j.at("area_scale").get<std::string>();
    if (scale == "small")
        e.area_scale = dx::AreaScale::Small;
    else if (scale == "large")
        e.area_scale = dx::AreaScale::Large;
    else
        throw Error(ErrorCode::MalformedFile, "unknown area scale '" + scale + "'");
    return e;
}

json report_json(const dx::DiagnosisReport& r) {
    json ranked = json::array();
    for (const auto& d : r.ranked)
        ranked.push_back({{"class_index", d.class_index}, {"id", d.id}, {"probability", d.probability}});
    json patches = json::array();
    for (const auto& p : r.per_patch)
        patches.push_back({{"bbox", rect_json(p.bbox)},
                           {"large_region", p.large_region},
                           {"probabilities", p.probabilities}});
    return {{"ranked", ranked},
            {"per_patch", patches},
            {"severity", r.severity},
            {"any_large_region", r.any_large_region},
            {"no_lesions", r.no_lesions},
            {"leaf",
             {{"bbox", rect_json(r.leaf.bbox)},
              {"area", r.leaf.area},
              {"orientation", r.leaf.orientation}}},
            {"width", r.width},
            {"height", r.height}};
}

dx::DiagnosisReport report_from(const json& j) {
    dx::DiagnosisReport r;
    for (const auto& d : j.at("ranked"))
        r.ranked.push_back({d.at("class_index").get<int>(), d.at("id").get<std::string>(),
                            d.at("probability").get<double>()});
    for (const auto& p : j.at("per_patch"))
        r.per_patch.push_back({rect_from(p.at("bbox")), p.at("large_region").get<bool>(),
                               p.at("probabilities").get<std::vector<double>>()});
    r.severity = j.at("severity").get<double>();
    r.any_large_region = j.at("any_large_region").get<bool>();
    r.no_lesions = j.at("no_lesions").get<bool>();
    const auto& l = j.at("leaf");
    r.leaf.bbox = rect_from(l.at("bbox"));
    r.leaf.area = l.at("area").get<std::size_t>();
    r.leaf.orientation = l.at("orientation").get<double>();
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    return r;
}

json model_json(const svm::SvmModel& m) {
    json machines = json::array();
    for (const auto& pm : m.machines)
        machines.push_back({{"positive", pm.positive},
                            {"negative", pm.negative},
                            {"bias", pm.svm.bias},
                            {"gamma", pm.svm.gamma},
                            {"C", pm.svm.C},
                            {"platt", {{"A", pm.platt.A}, {"B", pm.platt.B}}},
                            {"support_vectors", pm.svm.support_vectors},
                            {"dual_coefs", pm.svm.dual_coefs}});
    return {{"layout_version", m.layout_version},
            {"classes", m.class_names},
            {"C", m.C},
            {"gamma", m.gamma},
            {"scaling", {{"min", m.scaling.min}, {"max", m.scaling.max}}},
            {"machines", machines}};
}

svm::SvmModel model_from(const json& j) {
    svm::SvmModel m;
    m.layout_version = j.at("layout_version").get<int>();
    if (m.layout_version != features::kLayoutVersion)
        throw Error(ErrorCode::VersionMismatch,
                    "feature layout " + std::to_string(m.layout_version) + " is not supported");
    m.class_names = j.at("classes").get<std::vector<std::string>>();
    m.C = j.at("C").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.scaling.min = j.at("scaling").at("min").get<std::vector<double>>();
    m.scaling.max = j.at("scaling").at("max").get<std::vector<double>>();
    if (m.scaling.min.size() != m.scaling.max.size())
        throw Error(ErrorCode::MalformedFile, "scaling min/max differ in length");
    const int k = m.class_count();
    if (k < 2) throw Error(ErrorCode::MalformedFile, "a model needs at least two classes");
    for (const auto& e : j.at("machines")) {
        svm::PairMachine pm;
        pm.positive = e.at("positive").get<int>();
        pm.negative = e.at("negative").get<int>();
        pm.svm.bias = e.at("bias").get<double>();
        pm.svm.gamma = e.at("gamma").get<double>();
        pm.svm.C = e.at("C").get<double>();
        pm.platt.A = e.at("platt").at("A").get<double>();
        pm.platt.B = e.at("platt").at("B").get<double>();
        pm.svm.support_vectors = e.at("support_vectors").get<std::vector<std::vector<double>>>();
        pm.svm.dual_coefs = e.at("dual_coefs").get<std::vector<double>>();
        if (pm.svm.support_vectors.size() != pm.svm.dual_coefs.size())
            throw Error(ErrorCode::MalformedFile, "support vectors and coefficients differ in count");
        for (const auto& sv : pm.svm.support_vectors)
            if (sv.size() != m.dimension())
                throw Error(ErrorCode::MalformedFile, "support vector dimension mismatch");
        m.machines.push_back(std::move(pm));
    }
    std::size_t idx = 0;
    if (m.machines.size() != static_cast<std::size_t>(k * (k - 1) / 2))
        throw Error(ErrorCode::MalformedFile, "expected one machine per class pair");
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b, ++idx)
            if (m.machines[idx].positive != a || m.machines[idx].negative != b)
                throw Error(ErrorCode::MalformedFile, "machines are not in pair order");
    return m;
}

}  // namespace codec

using codec::json;

namespace {

constexpr const char* kChartFormat = "leafdx.chart_spec";
constexpr const char* kTransformFormat = "leafdx.colour_transform";
constexpr const char* kStrokesFormat = "leafdx.strokes";
constexpr const char* kModelFormat = "leafdx.svm_model";
constexpr const char* kCatalogFormat = "leafdx.disease_catalog";
constexpr const char* kReportFormat = "leafdx.diagnosis_report";
constexpr const char* kCvFormat = "leafdx.cv_report";
constexpr const char* kManifestFormat = "leafdx.dataset";

template <typename F>
auto decode(std::string_view text, const char* format, F&& body) {
    const json j = codec::parse(text);
    codec::check_envelope(j, format);
    return codec::guarded(format, [&] { return body(j); });
}

json rgb_json(const calib::Rgb& c) { return json::array({c[0], c[1], c[2]}); }

calib::Rgb rgb_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::MalformedFile, "colour needs 3 values");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string encode_chart_spec(const calib::ChartSpec& spec) {
    json j = codec::envelope(kChartFormat);
    const auto& l = spec.layout;
    j["layout"] = {{"rows", l.rows},           {"cols", l.cols},
                   {"patch", l.patch},         {"gap", l.gap},
                   {"white_frame", l.white_frame}, {"black_frame", l.black_frame},
                   {"margin", l.margin}};
    json patches = json::array();
    for (const auto& p : spec.patches)
        patches.push_back({{"id", p.id},
                           {"group", p.group},
                           {"row", p.row},
                           {"col", p.col},
                           {"rgb", rgb_json(p.reference_rgb)},
                           {"lab", json::array({p.reference_lab.L, p.reference_lab.a, p.reference_lab.b})}});
    j["patches"] = patches;
    return j.dump(2);
}

calib::ChartSpec decode_chart_spec(std::string_view text) {
    auto spec = decode(text, kChartFormat, [](const json& j) {
        calib::ChartSpec s;
        const auto& l = j.at("layout");
        s.layout.rows = l.at("rows").get<int>();
        s.layout.cols = l.at("cols").get<int>();
        s.layout.patch = l.at("patch").get<double>();
        s.layout.gap = l.at("gap").get<double>();
        s.layout.white_frame = l.at("white_frame").get<double>();
        s.layout.black_frame = l.at("black_frame").get<double>();
        s.layout.margin = l.at("margin").get<double>();
        for (const auto& e : j.at("patches")) {
            calib::ChartPatch p;
            p.id = e.at("id").get<int>();
            p.group = e.at("group").get<int>();
            p.row = e.at("row").get<int>();
            p.col = e.at("col").get<int>();
            p.reference_rgb = rgb_from(e.at("rgb"));
            const auto lab = rgb_from(e.at("lab"));
            p.reference_lab = {lab[0], lab[1], lab[2]};
            s.patches.push_back(p);
        }
        return s;
    });
    try {
        spec.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedFile, e.what());
    }
    return spec;
}

std::string encode_transform(const calib::ColourTransform& t) {
    json j = codec::envelope(kTransformFormat);
    j["transform"] = codec::transform_json(t);
    return j.dump(2);
}

calib::ColourTransform decode_transform(std::string_view text) {
    return decode(text, kTransformFormat,
                  [](const json& j) { return codec::transform_from(j.at("transform")); });
}

std::string encode_strokes(const leaf::StrokeSet& s) {
    json j = codec::envelope(kStrokesFormat);
    j["strokes"] = codec::strokes_json(s);
    return j.dump();
}

leaf::StrokeSet decode_strokes(std::string_view text) {
    return decode(text, kStrokesFormat, [](const json& j) { return codec::strokes_from(j.at("strokes")); });
}

std::string encode_model(const svm::SvmModel& m) {
    json j = codec::envelope(kModelFormat);
    j["model"] = codec::model_json(m);
    return j.dump();
}

svm::SvmModel decode_model(std::string_view text) {
    return decode(text, kModelFormat, [](const json& j) { return codec::model_from(j.at("model")); });
}

std::string encode_catalog(const dx::DiseaseCatalog& c) {
    json j = codec::envelope(kCatalogFormat);
    json arr = json::array();
    for (const auto& e : c.entries) arr.push_back(codec::entry_json(e));
    j["diseases"] = arr;
    return j.dump(2);
}

dx::DiseaseCatalog decode_catalog(std::string_view text) {
    return decode(text, kCatalogFormat, [](const json& j) {
        dx::DiseaseCatalog c;
        for (const auto& e : j.at("diseases")) c.entries.push_back(codec::entry_from(e));
        for (std::size_t i = 0; i < c.entries.size(); ++i)
            if (c.index_of(c.entries[i].id) != static_cast<int>(i))
                throw Error(ErrorCode::MalformedFile, "duplicate disease id '" + c.entries[i].id + "'");
        return c;
    });
}

std::string encode_report(const dx::DiagnosisReport& r) {
    json j = codec::envelope(kReportFormat);
    j["report"] = codec::report_json(r);
    return j.dump(2);
}

dx::DiagnosisReport decode_report(std::string_view text) {
    return decode(text, kReportFormat, [](const json& j) { return codec::report_from(j.at("report")); });
}

std::string encode_cv_report(const svm::CvReport& r) {
    json j = codec::envelope(kCvFormat);
    j["folds"] = r.folds;
    j["seed"] = r.seed;
    j["best"] = {{"C", r.best_C}, {"gamma", r.best_gamma}, {"accuracy", r.best_accuracy}};
    json grid = json::array();
    for (const auto& g : r.grid)
        grid.push_back({{"C", g.C}, {"gamma", g.gamma}, {"accuracy", g.mean_accuracy}, {"stalled", g.stalled}});
    j["grid"] = grid;
    return j.dump(2);
}

svm::CvReport decode_cv_report(std::string_view text) {
    return decode(text, kCvFormat, [](const json& j) {
        svm::CvReport r;
        r.folds = j.at("folds").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.best_C = j.at("best").at("C").get<double>();
        r.best_gamma = j.at("best").at("gamma").get<double>();
        r.best_accuracy = j.at("best").at("accuracy").get<double>();
        for (const auto& g : j.at("grid"))
            r.grid.push_back({g.at("C").get<double>(), g.at("gamma").get<double>(),
                              g.at("accuracy").get<double>(), g.at("stalled").get<bool>()});
        return r;
    });
}

std::string encode_manifest(const DatasetManifest& m) {
    json j = codec::envelope(kManifestFormat);
    j["classes"] = m.classes;
    return j.dump(2);
}

DatasetManifest decode_manifest(std::string_view text) {
    return decode(text, kManifestFormat, [](const json& j) {
        return DatasetManifest{j.at("classes").get<std::vector<std::string>>()};
    });
}

svm::LabeledDataset load_dataset(const std::filesystem::path& root,
                                 const std::filesystem::path& manifest) {
    namespace fs = std::filesystem;
    const DatasetManifest m = decode_manifest(read_text(manifest));
    svm::LabeledDataset data;
    data.class_names = m.classes;
    for (std::size_t c = 0; c < m.classes.size(); ++c) {
        const fs::path dir = root / m.classes[c];
        if (!fs::is_directory(dir))
            throw Error(ErrorCode::IoError, "missing class directory " + dir.string());
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const Raster img = read_image(f);
            data.vectors.push_back(features::patch_features(img, Rect{0, 0, img.width(), img.height()}));
            data.labels.push_back(static_cast<int>(c));
        }
    }
    return data;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace leafdx::io
