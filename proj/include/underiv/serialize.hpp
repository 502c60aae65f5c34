// JSON helpers for Eigen types and round-trip-exact number formatting.

#pragma once

#include "underiv/types.hpp"

#include <json.hpp>

#include <charconv>
#include <string>
#include <stdexcept>

namespace underiv {

using json = nlohmann::json;

// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Matrix <-> nested arrays (array of rows).
inline json matrix_to_json_rows(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

// Matrix <-> nested arrays (array of columns).
inline json matrix_to_json_cols(const Matrix& m) {
    json cols = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        json col = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) col.push_back(m(i, j));
        cols.push_back(std::move(col));
    }
    return cols;
}

inline json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline Matrix matrix_from_json_rows(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("matrix_from_json_rows: expected array");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Matrix(0, 0);
    const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const json& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw std::invalid_argument("matrix_from_json_rows: ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
}

inline Matrix matrix_from_json_cols(const json& j) {
    Matrix as_rows = matrix_from_json_rows(j);
    return as_rows.transpose();
}

inline Vector vector_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("vector_from_json: expected array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

} // namespace underiv
