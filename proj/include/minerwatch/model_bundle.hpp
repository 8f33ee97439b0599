#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minerwatch/pipeline.hpp"

namespace minerwatch {

inline constexpr int kModelFormatVersion = 1;

struct ModelProvenance {
  std::uint64_t seed = 10;
  std::string winner;
  double cv_f1 = 0.0;
  std::string machine_id;
  std::size_t n_train = 0;
  double window_s = 30.0;
  double rate_hz = 10.0;
};

/// Everything needed to classify a raw sample: scaler, mask, classifier,
/// label dictionary and where it came from.
struct ModelBundle {
  std::string target;                // "binary" or "currency"
  std::vector<std::string> classes;  // label dictionary, index = class id
  TrainedPipeline pipeline;
  ModelProvenance provenance;

  /// Index of the "mining" class for binary models.
  std::optional<int> positive_class() const;
};

nlohmann::json to_json(const ModelBundle& bundle);
/// Throws Error(format) on a version or layout mismatch.
ModelBundle model_from_json(const nlohmann::json& j);

void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace minerwatch
