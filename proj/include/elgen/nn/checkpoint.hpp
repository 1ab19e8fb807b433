#pragma once

#include <string>

#include "elgen/nn/params.hpp"

#include <nlohmann/json_fwd.hpp>

namespace elgen {

// Versioned binary container: JSON metadata followed by named float tensors.
// Metadata carries the stage tag, seed, epoch counter, schedule parameters
// and the serialized vocabulary, so a checkpoint is self-describing.
struct Checkpoint {
    std::string meta_json;  // parsed on demand
    ParamStore<float> params;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    nlohmann::json meta() const;
    void set_meta(const nlohmann::json& j);
};

}  // namespace elgen
