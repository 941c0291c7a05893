#include "evolver/variant.hpp"

namespace evolver {

using nlohmann::json;

Variant Variant::baseline(SystemSpec spec) {
    Variant v;
    v.variant_id = spec_content_hash(spec);
    v.spec = std::move(spec);
    v.iteration = 0;
    return v;
}

Variant Variant::child(SystemSpec spec, const Variant& parent, std::vector<Hypothesis> applied,
                       int iteration) {
    Variant v;
    v.variant_id = spec_content_hash(spec);
    v.parent_id = parent.variant_id;
    v.spec = std::move(spec);
    v.applied_hypotheses = std::move(applied);
    v.iteration = iteration;
    return v;
}

json Variant::meta_json() const {
    json j;
    j["variant_id"] = variant_id;
    j["parent_id"] = parent_id ? json(*parent_id) : json(nullptr);
    j["iteration"] = iteration;
    j["applied_hypotheses"] = json::array();
    for (const auto& h : applied_hypotheses) j["applied_hypotheses"].push_back(h.to_json());
    return j;
}

}  // namespace evolver
