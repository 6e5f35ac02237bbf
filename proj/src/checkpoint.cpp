#include "bayesreloc/checkpoint.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "bayesreloc/error.hpp"
#include "bayesreloc/scenes.hpp"

namespace bayesreloc {
namespace {

constexpr const char* kNetTag = "bayesreloc-net-v1";

nlohmann::json layer_json(const Layer& l) {
    return {{"input_width", l.spec.input_width},
            {"output_width", l.spec.output_width},
            {"has_dropout", l.spec.has_dropout},
            {"activation", l.spec.activation == Activation::Rectifier ? "rectifier" : "identity"},
            {"weights", l.weights},
            {"bias", l.bias}};
}

Layer layer_from(const nlohmann::json& j) {
    Layer l;
    l.spec.input_width = j.at("input_width").get<std::size_t>();
    l.spec.output_width = j.at("output_width").get<std::size_t>();
    l.spec.has_dropout = j.at("has_dropout").get<bool>();
    const auto act = j.at("activation").get<std::string>();
    if (act == "rectifier") {
        l.spec.activation = Activation::Rectifier;
    } else if (act == "identity") {
        l.spec.activation = Activation::Identity;
    } else {
        throw Error(ErrorKind::ParseError, "unknown activation '" + act + "'");
    }
    l.weights = j.at("weights").get<std::vector<double>>();
    l.bias = j.at("bias").get<std::vector<double>>();
    return l;
}

}  // namespace

std::string format_checkpoint(const Checkpoint& checkpoint) {
    const NetworkParams& net = checkpoint.net;
    nlohmann::json j;
    j["format"] = kNetTag;
    j["dropout_p"] = net.dropout_p;
    j["init_seed"] = net.seed;
    j["train_seed"] = checkpoint.train_seed ? nlohmann::json(*checkpoint.train_seed) : nlohmann::json(nullptr);
    j["beta"] = checkpoint.beta ? nlohmann::json(*checkpoint.beta) : nlohmann::json(nullptr);
    j["output_scale"] = net.output.scale;
    j["output_offset"] = net.output.offset;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : net.layers) j["layers"].push_back(layer_json(l));
    if (net.aux) {
        j["aux"] = {{"tap_layer", net.aux->spec.tap_layer},
                    {"loss_weight", net.aux->spec.loss_weight},
                    {"layer", layer_json(net.aux->layer)}};
    } else {
        j["aux"] = nullptr;
    }
    return j.dump() + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.value("format", std::string()) != kNetTag) {
            throw Error(ErrorKind::ParseError, std::string("missing format tag ") + kNetTag);
        }
        Checkpoint cp;
        cp.net.dropout_p = j.at("dropout_p").get<double>();
        cp.net.seed = j.at("init_seed").get<std::uint64_t>();
        if (!j.at("train_seed").is_null()) cp.train_seed = j["train_seed"].get<std::uint64_t>();
        if (j.contains("beta") && !j["beta"].is_null()) cp.beta = j["beta"].get<double>();
        if (j.contains("output_scale")) {
            cp.net.output.scale = j["output_scale"].get<std::array<double, kPoseOutputWidth>>();
            cp.net.output.offset = j.at("output_offset").get<std::array<double, kPoseOutputWidth>>();
        }
        for (const auto& lj : j.at("layers")) cp.net.layers.push_back(layer_from(lj));
        if (j.contains("aux") && !j["aux"].is_null()) {
            const auto& a = j["aux"];
            cp.net.aux = AuxHead{{a.at("tap_layer").get<std::size_t>(), a.at("loss_weight").get<double>()},
                                 layer_from(a.at("layer"))};
        }
        try {
            cp.net.validate();
        } catch (const Error& e) {
            throw Error(ErrorKind::ParseError, std::string("checkpoint describes an invalid network: ") + e.what());
        }
        for (double v : flatten(cp.net)) {
            if (!std::isfinite(v)) throw Error(ErrorKind::ParseError, "checkpoint contains non-finite parameters");
        }
        return cp;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    write_text_file(path, format_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return parse_checkpoint(read_text_file(path));
}

}  // namespace bayesreloc
