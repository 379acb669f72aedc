#pragma once

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "kaleido/core/error.hpp"
#include "kaleido/nnet/adam.hpp"
#include "kaleido/nnet/mlp.hpp"

// JSON checkpoint encoding. nlohmann/json prints doubles with the shortest
// representation that round-trips, so save -> load is value-exact.

namespace kaleido::nnet {

using Json = nlohmann::json;

inline Json vector_to_json(const Eigen::VectorXd& v) {
    return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Eigen::VectorXd vector_from_json(const Json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Column-major flattening, shape stored alongside.
inline Json matrix_to_json(const Eigen::MatrixXd& m) {
    return Json{{"rows", m.rows()},
                {"cols", m.cols()},
                {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Eigen::MatrixXd matrix_from_json(const Json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw IoError("matrix payload length does not match its shape");
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

inline Json to_json(const Mlp& net) {
    Json shapes = Json::array();
    Json activations = Json::array();
    Json params = Json::array();
    for (const auto& l : net.layers()) {
        shapes.push_back({l.weight.rows(), l.weight.cols()});
        activations.push_back(to_string(l.activation));
        params.push_back({{"weight", std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size())},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    return Json{{"layer_shapes", shapes}, {"activations", activations}, {"parameters", params}};
}

inline Mlp mlp_from_json(const Json& j) {
    try {
        const auto& shapes = j.at("layer_shapes");
        const auto& acts = j.at("activations");
        const auto& params = j.at("parameters");
        if (shapes.size() != acts.size() || shapes.size() != params.size())
            throw IoError("checkpoint layer lists have different lengths");
        std::vector<Layer> layers;
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            const auto out = shapes[i].at(0).get<Eigen::Index>();
            const auto in = shapes[i].at(1).get<Eigen::Index>();
            const auto w = params[i].at("weight").get<std::vector<double>>();
            const auto b = params[i].at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != out * in || static_cast<Eigen::Index>(b.size()) != out)
                throw IoError("checkpoint layer " + std::to_string(i) + " has inconsistent parameter counts");
            Layer layer;
            layer.weight = Eigen::Map<const Eigen::MatrixXd>(w.data(), out, in);
            layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
            layer.activation = activation_from_string(acts[i].get<std::string>());
            layers.push_back(std::move(layer));
        }
        return Mlp(std::move(layers));
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed network checkpoint: ") + e.what());
    }
}

inline Json to_json(const AdamState& s) {
    Json m = Json::array();
    Json v = Json::array();
    for (const auto& x : s.first_moment) m.push_back(vector_to_json(x));
    for (const auto& x : s.second_moment) v.push_back(vector_to_json(x));
    return Json{{"beta1", s.config.beta1},
                {"beta2", s.config.beta2},
                {"eps", s.config.eps},
                {"learning_rate", s.config.learning_rate},
                {"step", s.step},
                {"first_moment", m},
                {"second_moment", v}};
}

inline AdamState adam_from_json(const Json& j) {
    try {
        AdamState s;
        s.config.beta1 = j.at("beta1").get<double>();
        s.config.beta2 = j.at("beta2").get<double>();
        s.config.eps = j.at("eps").get<double>();
        s.config.learning_rate = j.at("learning_rate").get<double>();
        s.step = j.at("step").get<std::int64_t>();
        for (const auto& x : j.at("first_moment")) s.first_moment.push_back(vector_from_json(x));
        for (const auto& x : j.at("second_moment")) s.second_moment.push_back(vector_from_json(x));
        if (s.first_moment.size() != s.second_moment.size())
            throw IoError("adam moment lists have different lengths");
        return s;
    } catch (const Json::exception& e) {
        throw IoError(std::string("malformed optimizer checkpoint: ") + e.what());
    }
}

}  // namespace kaleido::nnet
