#ifndef DECSPACE_MODEL_IO_HPP
#define DECSPACE_MODEL_IO_HPP

#include "decspace/network.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace decspace {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const Net& net);
Net model_from_json(const nlohmann::json& doc);

/// Serialized model text; doubles are written in shortest exact round-trip form.
std::string serialize_model(const Net& net);

void save_model(const Net& net, const std::filesystem::path& path);
Net load_model(const std::filesystem::path& path);

}  // namespace decspace

#endif  // DECSPACE_MODEL_IO_HPP
