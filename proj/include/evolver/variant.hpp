#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evolver/hypothesis.hpp"
#include "evolver/spec_model.hpp"

namespace evolver {

/// One concrete configuration of the agent system: the unit of mutation,
/// evaluation, and selection. variant_id is the content hash of the
/// canonical spec text, so lineage survives serialization round trips.
struct Variant {
    std::string variant_id;
    std::optional<std::string> parent_id;
    SystemSpec spec;
    std::vector<Hypothesis> applied_hypotheses;
    int iteration = 0;

    /// Baseline variant: iteration 0, no parent.
    static Variant baseline(SystemSpec spec);

    /// Child produced by applying `applied` to the parent's spec.
    static Variant child(SystemSpec spec, const Variant& parent,
                         std::vector<Hypothesis> applied, int iteration);

    nlohmann::json meta_json() const;
};

}  // namespace evolver
