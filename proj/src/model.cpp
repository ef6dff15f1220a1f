#include "vortexlab/model.hpp"

using nlohmann::json;

namespace vortexlab::model {

void EncoderConfig::validate() const {
    if (mlp_widths.size() < 2) throw config_error("encoder: need at least two MLP layers");
    for (int w : mlp_widths)
        if (w < 1) throw config_error("encoder: widths must be >= 1");
    if (hidden_dim < 1) throw config_error("encoder: hidden_dim must be >= 1");
    if (proj_dims.size() != 2) throw config_error("encoder: projection must be two layers");
    for (int w : proj_dims)
        if (w < 1) throw config_error("encoder: projection widths must be >= 1");
    if (aggregator != "lstm" && aggregator != "mean")
        throw config_error("encoder: aggregator must be lstm or mean");
    if (center_hidden < 1 || forecast_hidden < 1)
        throw config_error("encoder: head widths must be >= 1");
}

json EncoderConfig::to_json() const {
    return {{"mlp_widths", mlp_widths},   {"hidden_dim", hidden_dim},
            {"proj_dims", proj_dims},     {"aggregator", aggregator},
            {"center_hidden", center_hidden}, {"forecast_hidden", forecast_hidden}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
    EncoderConfig c;
    c.mlp_widths = j.value("mlp_widths", c.mlp_widths);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.proj_dims = j.value("proj_dims", c.proj_dims);
    c.aggregator = j.value("aggregator", c.aggregator);
    c.center_hidden = j.value("center_hidden", c.center_hidden);
    c.forecast_hidden = j.value("forecast_hidden", c.forecast_hidden);
    c.validate();
    return c;
}

std::vector<std::string> component_names(const EncoderConfig& cfg, const std::string& comp) {
    std::vector<std::string> out;
    if (comp == "encoder") {
        for (size_t i = 0; i < cfg.mlp_widths.size(); ++i) {
            out.push_back("enc.l" + std::to_string(i + 1) + ".w");
            out.push_back("enc.l" + std::to_string(i + 1) + ".b");
        }
    } else if (comp == "aggregator") {
        if (cfg.aggregator == "lstm") out = {"agg.wx", "agg.wh", "agg.b"};
    } else if (comp == "projection") {
        out = {"proj.l1.w", "proj.l1.b", "proj.l2.w", "proj.l2.b"};
    } else if (comp == "center") {
        out = {"center.l1.wp", "center.l1.wh", "center.l1.b", "center.l2.w", "center.l2.b"};
    } else if (comp == "forecast") {
        out = {"fc.l1.w", "fc.l1.b", "fc.l2.w", "fc.l2.b"};
    } else {
        throw std::invalid_argument("component_names: unknown component " + comp);
    }
    return out;
}

} // namespace vortexlab::model
