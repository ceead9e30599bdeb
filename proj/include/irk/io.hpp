#pragma once

#include "irk/dense.hpp"
#include "irk/errors.hpp"
#include "irk/sparse.hpp"
#include "irk/tableau.hpp"

#include "json.hpp"

#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace irk {

inline nlohmann::json to_json(const DenseMatrix& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return rows;
}

/// Tableau with its eigen-blocks, for debugging and cross-checks.
inline nlohmann::json tableau_to_json(const ButcherTableau& t) {
    nlohmann::json j;
    j["family"] = std::string(family_name(t.family));
    j["s"] = t.s;
    j["order"] = t.order;
    j["a0"] = to_json(t.a0);
    j["b0"] = t.b0;
    j["c0"] = t.c0;
    const StagePrep prep = prepare_stages(t);
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : prep.schur.blocks)
        blocks.push_back({{"offset", b.offset}, {"size", b.size}, {"eta", b.eta}, {"beta", b.beta}, {"phi", b.phi}});
    j["eigen_blocks"] = blocks;
    return j;
}

/// Matrix Market coordinate, real, general.
inline void write_matrix_market(std::ostream& os, const SparseMatrix& a) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
    os << std::setprecision(17);
    for (const auto& t : a.triplets()) os << t.row + 1 << ' ' << t.col + 1 << ' ' << t.value << '\n';
}

inline SparseMatrix read_matrix_market(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("%%MatrixMarket matrix coordinate real general", 0) != 0)
        throw ConfigError("read_matrix_market: unsupported header");
    while (std::getline(is, line) && !line.empty() && line[0] == '%') {
    }
    std::istringstream dims(line);
    std::size_t rows = 0, cols = 0, nnz = 0;
    if (!(dims >> rows >> cols >> nnz)) throw ConfigError("read_matrix_market: bad size line");
    std::vector<Triplet> t;
    t.reserve(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
        std::size_t i = 0, j = 0;
        double v = 0.0;
        if (!(is >> i >> j >> v) || i == 0 || j == 0 || i > rows || j > cols)
            throw ConfigError("read_matrix_market: bad entry");
        t.push_back({i - 1, j - 1, v});
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) {
        if (row.size() != header.size()) throw DimensionError("CsvTable: row width differs from header");
        rows.push_back(std::move(row));
    }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ConfigError("CsvTable: no column '" + name + "'");
    }

    void write(std::ostream& os) const {
        auto line = [&os](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) os << ',';
                const bool quote = r[i].find_first_of(",\"\n") != std::string::npos;
                if (quote) {
                    os << '"';
                    for (char c : r[i]) os << (c == '"' ? "\"\"" : std::string(1, c));
                    os << '"';
                } else {
                    os << r[i];
                }
            }
            os << '\n';
        };
        line(header);
        for (const auto& r : rows) line(r);
    }

    std::string str() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }
};

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    double back = 0.0;
    for (int p = 6; p <= 17; ++p) {
        std::ostringstream t;
        t << std::setprecision(p) << v;
        std::istringstream(t.str()) >> back;
        if (back == v) return t.str();
    }
    return os.str();
}

}  // namespace irk
