#pragma once

// Model files are JSON documents:
//
//   { "n_x", "n_u", "n_y", "m", "convention": "dynamic" | "classic",
//     "T": [[...], ...]            rows of T, T[j][i] = P(z_{k+1}=j | z_k=i),
//     "modes": [ { "A", "B", "C", "D", "Pi_half" }, ... ],
//     "prior": { "modes": [ [ { "weight", "mean", "P_half" }, ... ], ... ] } }
//
// Matrices are arrays of rows. A mode may give "Q", "R" and optionally "S"
// instead of "Pi_half"; the factor is then computed on load.
//
// Dataset files are CSV with header k,u1..,y1..[,z,x1..], 1-based k and z,
// and every number printed with 17 significant digits.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "jmls/model.hpp"
#include "jmls/simulate.hpp"

namespace jmls {

std::string format_double(double v);

std::string model_to_json(const JmlsModel& model);
JmlsModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const JmlsModel& model);
JmlsModel load_model(const std::filesystem::path& path);

void write_dataset_csv(std::ostream& os, const Dataset& data);
Dataset read_dataset_csv(std::istream& is, const std::string& source = "<stream>");
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace jmls
