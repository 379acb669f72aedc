#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kaleido/core/error.hpp"
#include "kaleido/core/io.hpp"
#include "kaleido/data/canvas.hpp"
#include "kaleido/data/gmm.hpp"

namespace kaleido::data {

using Json = nlohmann::json;

/// CSV: sample_id,class,mode,dim_0..dim_{d-1}; doubles printed round-trip exact.
inline std::string dataset_to_csv(const std::vector<LabeledSample>& samples) {
    require(!samples.empty(), "cannot serialize an empty dataset");
    const auto d = samples.front().x.size();
    std::string out = "sample_id,class,mode";
    for (Eigen::Index j = 0; j < d; ++j) out += ",dim_" + std::to_string(j);
    out += '\n';
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        require(s.x.size() == d, "dataset rows have different dimensions");
        out += std::to_string(i) + ',' + std::to_string(s.class_id) + ',' + std::to_string(s.mode_id);
        for (Eigen::Index j = 0; j < d; ++j) out += ',' + format_double(s.x[j]);
        out += '\n';
    }
    return out;
}

/// Inverse of dataset_to_csv. `modes_per_class` rebuilds the global component index.
inline std::vector<LabeledSample> dataset_from_csv(const std::string& text, int modes_per_class = 2) {
    const auto lines = split_lines(text);
    if (lines.empty()) throw IoError("dataset file is empty");
    const auto header = split(lines.front(), ',');
    if (header.size() < 4 || header[0] != "sample_id" || header[1] != "class" || header[2] != "mode")
        throw IoError("dataset header must start with sample_id,class,mode,dim_0");
    const std::size_t d = header.size() - 3;
    std::vector<LabeledSample> out;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        const auto f = split(lines[li], ',');
        if (f.size() != header.size())
            throw IoError("dataset line " + std::to_string(li + 1) + " has " + std::to_string(f.size()) +
                          " fields, expected " + std::to_string(header.size()));
        LabeledSample s;
        s.class_id = static_cast<int>(parse_int(f[1], "class"));
        s.mode_id = static_cast<int>(parse_int(f[2], "mode"));
        s.component = s.class_id * modes_per_class + s.mode_id;
        s.x.resize(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) s.x[static_cast<Eigen::Index>(j)] = parse_double(f[3 + j], "dim");
        out.push_back(std::move(s));
    }
    if (out.empty()) throw IoError("dataset file has no rows");
    return out;
}

inline Json to_json(const Bump& b) {
    return Json{{"cx", b.cx},
                {"cy", b.cy},
                {"sigma_major", b.sigma_major},
                {"sigma_minor", b.sigma_minor},
                {"theta_deg", b.theta_deg},
                {"amplitude", b.amplitude}};
}

inline Bump bump_from_json(const Json& j) {
    Bump b;
    b.cx = j.at("cx").get<double>();
    b.cy = j.at("cy").get<double>();
    b.sigma_major = j.at("sigma_major").get<double>();
    b.sigma_minor = j.at("sigma_minor").get<double>();
    b.theta_deg = j.at("theta_deg").get<double>();
    b.amplitude = j.at("amplitude").get<double>();
    return b;
}

/// Canvas sidecar: one array of bumps per sample, in dataset order.
inline Json bumps_sidecar(const std::vector<LabeledSample>& samples) {
    Json rows = Json::array();
    for (const auto& s : samples) {
        Json row = Json::array();
        for (const auto& b : s.bumps) row.push_back(to_json(b));
        rows.push_back(row);
    }
    return Json{{"bumps", rows}};
}

inline void attach_bumps(std::vector<LabeledSample>& samples, const Json& sidecar) {
    try {
        const auto& rows = sidecar.at("bumps");
        if (rows.size() != samples.size()) throw IoError("bump sidecar row count differs from dataset");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            samples[i].bumps.clear();
            for (const auto& b : rows[i]) samples[i].bumps.push_back(bump_from_json(b));
        }
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed bump sidecar: ") + e.what());
    }
}

inline Json to_json(const GmmSpec& spec) {
    Json comps = Json::array();
    for (const auto& c : spec.components) {
        comps.push_back({{"weight", c.weight},
                         {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                         {"variance", std::vector<double>(c.variance.data(), c.variance.data() + c.variance.size())},
                         {"class", c.class_id},
                         {"mode", c.mode_id}});
    }
    return Json{{"components", comps}};
}

inline GmmSpec gmm_from_json(const Json& j) {
    try {
        GmmSpec spec;
        for (const auto& c : j.at("components")) {
            GmmComponent comp;
            comp.weight = c.at("weight").get<double>();
            const auto mean = c.at("mean").get<std::vector<double>>();
            const auto var = c.at("variance").get<std::vector<double>>();
            comp.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
            comp.variance = Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size()));
            comp.class_id = c.at("class").get<int>();
            comp.mode_id = c.at("mode").get<int>();
            spec.components.push_back(std::move(comp));
        }
        spec.validate();
        return spec;
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed GMM spec: ") + e.what());
    }
}

inline Json to_json(const CanvasSpec& s) {
    return Json{{"width", s.width},
                {"height", s.height},
                {"min_bumps", s.min_bumps},
                {"max_bumps", s.max_bumps},
                {"sigma_major_min", s.sigma_major_min},
                {"sigma_major_max", s.sigma_major_max},
                {"minor_ratio_min", s.minor_ratio_min},
                {"minor_ratio_max", s.minor_ratio_max},
                {"amplitude_min", s.amplitude_min},
                {"amplitude_max", s.amplitude_max},
                {"orientation_jitter_deg", s.orientation_jitter_deg},
                {"extent_sigmas", s.extent_sigmas},
                {"min_separation", s.min_separation}};
}

inline CanvasSpec canvas_from_json(const Json& j) {
    try {
        CanvasSpec s;
        s.width = j.at("width").get<int>();
        s.height = j.at("height").get<int>();
        s.min_bumps = j.at("min_bumps").get<int>();
        s.max_bumps = j.at("max_bumps").get<int>();
        s.sigma_major_min = j.at("sigma_major_min").get<double>();
        s.sigma_major_max = j.at("sigma_major_max").get<double>();
        s.minor_ratio_min = j.at("minor_ratio_min").get<double>();
        s.minor_ratio_max = j.at("minor_ratio_max").get<double>();
        s.amplitude_min = j.at("amplitude_min").get<double>();
        s.amplitude_max = j.at("amplitude_max").get<double>();
        s.orientation_jitter_deg = j.at("orientation_jitter_deg").get<double>();
        s.extent_sigmas = j.at("extent_sigmas").get<double>();
        s.min_separation = j.at("min_separation").get<double>();
        return s;
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed canvas spec: ") + e.what());
    }
}

}  // namespace kaleido::data
