#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <optional>
#include <string>

#include "mmhe/linmodel.hpp"
#include "mmhe/setops.hpp"

namespace mmhe {

// Row-major nested-array helpers shared by every JSON surface.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

// Model document with fields "A", "G", "B", "C", "Q", "R", "L"; "B" may be
// absent when there is no control channel.
struct ModelDocument {
    LinearPlant plant;
    std::optional<NoiseWeights> weights;
    std::optional<Eigen::MatrixXd> L;
};

nlohmann::json model_to_json(const ModelDocument& doc);
ModelDocument model_from_json(const nlohmann::json& j);

nlohmann::json box_to_json(const Box& box);
Box box_from_json(const nlohmann::json& j);

}  // namespace mmhe
