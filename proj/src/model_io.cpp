#include "flam/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "flam/errors.hpp"

namespace flam::io {

namespace {

using nlohmann::json;

const char* loss_name(LossKind kind) { return kind == LossKind::logistic ? "logistic" : "squared"; }

LossKind parse_loss(const std::string& name) {
    if (name == "squared") return LossKind::squared;
    if (name == "logistic") return LossKind::logistic;
    throw DataError("model file: unknown loss '" + name + "'");
}

json model_to_json(const FlamModel& m) {
    json features = json::array();
    for (Index j = 0; j < m.p(); ++j) {
        const StepFunction& f = m.components[static_cast<std::size_t>(j)];
        features.push_back({{"name", m.feature_names[static_cast<std::size_t>(j)]},
                            {"knots", f.knots},
                            {"levels", f.levels},
                            {"domain", {f.domain_lo, f.domain_hi}}});
    }
    return {{"theta0", m.theta0},
            {"lambda", m.penalty.lambda},
            {"alpha", m.penalty.alpha},
            {"epsilon", m.penalty.epsilon},
            {"objective", m.objective},
            {"iterations", m.iterations},
            {"converged", m.converged},
            {"hit_cap", m.hit_cap},
            {"features", features}};
}

FlamModel model_from_json(const json& j, LossKind loss, const std::string& response) {
    FlamModel m;
    m.loss = loss;
    m.response_name = response;
    m.theta0 = j.at("theta0").get<double>();
    m.penalty.lambda = j.at("lambda").get<double>();
    m.penalty.alpha = j.at("alpha").get<double>();
    m.penalty.epsilon = j.at("epsilon").get<double>();
    m.objective = j.at("objective").get<double>();
    m.iterations = j.at("iterations").get<int>();
    m.converged = j.at("converged").get<bool>();
    m.hit_cap = j.value("hit_cap", false);
    for (const auto& f : j.at("features")) {
        StepFunction s;
        s.knots = f.at("knots").get<std::vector<double>>();
        s.levels = f.at("levels").get<std::vector<double>>();
        const auto domain = f.at("domain").get<std::vector<double>>();
        if (domain.size() != 2) throw DataError("model file: domain must have two entries");
        s.domain_lo = domain[0];
        s.domain_hi = domain[1];
        if (!s.valid()) throw DataError("model file: malformed step function");
        m.feature_names.push_back(f.at("name").get<std::string>());
        m.components.push_back(std::move(s));
    }
    return m;
}

}  // namespace

std::string to_json(const ModelFile& file) {
    if (file.models.empty()) throw InvalidArgument("to_json: no models");
    const FlamModel& first = file.models.front();
    json fits = json::array();
    for (const auto& m : file.models) fits.push_back(model_to_json(m));
    json root = {{"format_version", kFormatVersion},
                 {"loss", loss_name(first.loss)},
                 {"response", first.response_name},
                 {"features", first.feature_names},
                 {"fits", fits}};
    return root.dump(2) + "\n";
}

ModelFile from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model file: invalid JSON: ") + e.what());
    }
    try {
        if (!root.contains("format_version")) throw DataError("model file: missing format_version");
        const int version = root.at("format_version").get<int>();
        if (version != kFormatVersion) {
            throw DataError("model file: unsupported format_version " + std::to_string(version) + " (expected " +
                            std::to_string(kFormatVersion) + ")");
        }
        const LossKind loss = parse_loss(root.at("loss").get<std::string>());
        const std::string response = root.at("response").get<std::string>();
        const auto names = root.at("features").get<std::vector<std::string>>();
        ModelFile file;
        for (const auto& fit : root.at("fits")) {
            FlamModel m = model_from_json(fit, loss, response);
            if (m.feature_names != names) throw DataError("model file: fit feature list disagrees with header");
            file.models.push_back(std::move(m));
        }
        if (file.models.empty()) throw DataError("model file: no fits");
        return file;
    } catch (const json::exception& e) {
        throw DataError(std::string("model file: ") + e.what());
    }
}

void save(const std::string& path, const ModelFile& file) {
    const std::string text = to_json(file);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path + "' failed");
}

ModelFile load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

}  // namespace flam::io
