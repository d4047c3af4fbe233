#pragma once

#include <string>

#include <json.hpp>

#include "mvmdp/mdp.hpp"

namespace mvmdp {

inline constexpr const char* kModelSchema = "mvmdp-model/1";

nlohmann::json model_to_json(const TabularMdp& mdp);
// Throws ModelError on malformed documents.  Does not run validate().
TabularMdp model_from_json(const nlohmann::json& doc);

void save_model(const TabularMdp& mdp, const std::string& path);
TabularMdp load_model(const std::string& path);

}  // namespace mvmdp
