#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "morphcl/network.hpp"

namespace morphcl {

// Checkpoint schema:
// {arch: [ints], filter_size: int|null, activation: string,
//  layers: [{w: [[f64]], b: [f64]}]}
inline nlohmann::json network_to_json(const Network& net) {
    nlohmann::json j;
    j["arch"] = net.arch.widths;
    if (net.arch.filter_size)
        j["filter_size"] = *net.arch.filter_size;
    else
        j["filter_size"] = nullptr;
    ActivationKind hidden = ActivationKind::identity;
    for (const auto& l : net.layers)
        if (l.act != ActivationKind::identity) hidden = l.act;
    j["activation"] = to_string(hidden);
    j["layers"] = nlohmann::json::array();
    for (const auto& l : net.layers) {
        nlohmann::json jl;
        auto& w = jl["w"] = nlohmann::json::array();
        for (std::size_t r = 0; r < l.w.rows(); ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t c = 0; c < l.w.cols(); ++c) row.push_back(l.w(r, c));
            w.push_back(std::move(row));
        }
        jl["b"] = l.b;
        j["layers"].push_back(std::move(jl));
    }
    return j;
}

inline Network network_from_json(const nlohmann::json& j) {
    Network net;
    net.arch.widths = j.at("arch").get<std::vector<int>>();
    if (j.contains("filter_size") && !j.at("filter_size").is_null())
        net.arch.filter_size = j.at("filter_size").get<int>();
    net.arch.validate();
    const ActivationKind hidden = activation_from_string(j.at("activation").get<std::string>());
    const auto& layers = j.at("layers");
    detail::require(layers.size() == net.arch.layer_count(),
                    "network json: layer count does not match architecture");
    net.layers.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& jl = layers[i];
        const auto& w = jl.at("w");
        const auto out = static_cast<std::size_t>(net.arch.widths[i + 1]);
        const auto in = static_cast<std::size_t>(net.arch.widths[i]);
        detail::require(w.size() == out, "network json: weight rows mismatch at layer " +
                                             std::to_string(i));
        net.layers[i].w = Matrix(out, in);
        for (std::size_t r = 0; r < out; ++r) {
            detail::require(w[r].size() == in, "network json: weight cols mismatch at layer " +
                                                   std::to_string(i));
            for (std::size_t c = 0; c < in; ++c) net.layers[i].w(r, c) = w[r][c].get<double>();
        }
        net.layers[i].b = jl.at("b").get<std::vector<double>>();
        detail::require(net.layers[i].b.size() == out,
                        "network json: bias size mismatch at layer " + std::to_string(i));
        net.layers[i].act = (i + 1 == layers.size()) ? ActivationKind::identity : hidden;
    }
    return net;
}

inline void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << network_to_json(net).dump(2) << "\n";
}

inline Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    nlohmann::json j;
    in >> j;
    return network_from_json(j);
}

}  // namespace morphcl
