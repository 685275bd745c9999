#include "mmhe/json_io.hpp"

#include <stdexcept>

namespace mmhe {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw std::invalid_argument("matrix_from_json: expected nested arrays");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw std::invalid_argument("matrix_from_json: ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw std::invalid_argument("vector_from_json: expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

nlohmann::json model_to_json(const ModelDocument& doc) {
    nlohmann::json j;
    j["A"] = matrix_to_json(doc.plant.A);
    j["G"] = matrix_to_json(doc.plant.G);
    j["C"] = matrix_to_json(doc.plant.C);
    if (doc.plant.has_control()) j["B"] = matrix_to_json(doc.plant.B);
    if (doc.weights) {
        j["Q"] = matrix_to_json(doc.weights->Q);
        j["R"] = matrix_to_json(doc.weights->R);
    }
    if (doc.L) j["L"] = matrix_to_json(*doc.L);
    return j;
}

ModelDocument model_from_json(const nlohmann::json& j) {
    ModelDocument doc;
    Eigen::MatrixXd a = matrix_from_json(j.at("A"));
    Eigen::MatrixXd g = matrix_from_json(j.at("G"));
    Eigen::MatrixXd c = matrix_from_json(j.at("C"));
    if (j.contains("B")) {
        doc.plant = LinearPlant(a, g, matrix_from_json(j.at("B")), c);
    } else {
        doc.plant = LinearPlant(a, g, c);
    }
    if (j.contains("Q") && j.contains("R"))
        doc.weights = NoiseWeights(matrix_from_json(j.at("Q")), matrix_from_json(j.at("R")));
    if (j.contains("L")) doc.L = matrix_from_json(j.at("L"));
    return doc;
}

nlohmann::json box_to_json(const Box& box) {
    nlohmann::json j;
    j["lower"] = vector_to_json(box.lower);
    j["upper"] = vector_to_json(box.upper);
    return j;
}

Box box_from_json(const nlohmann::json& j) {
    return Box(vector_from_json(j.at("lower")), vector_from_json(j.at("upper")));
}

}  // namespace mmhe
