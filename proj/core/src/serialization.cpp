#include "jmls/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace jmls {
namespace {

using json = nlohmann::json;

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Parse, where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) fail(where, std::string("missing field '") + key + "'");
  return obj.at(key);
}

Matrix matrix_from_json(const json& j, Index rows, Index cols, const std::string& where) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows) {
    fail(where, "expected " + std::to_string(rows) + " rows");
  }
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      fail(where, "row " + std::to_string(i + 1) + " must have " + std::to_string(cols) + " entries");
    }
    for (Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) fail(where, "non-numeric entry");
      M(i, c) = v.get<double>();
    }
  }
  return M;
}

Vector vector_from_json(const json& j, Index n, const std::string& where) {
  if (!j.is_array() || static_cast<Index>(j.size()) != n) fail(where, "expected " + std::to_string(n) + " entries");
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    const json& e = j[static_cast<std::size_t>(i)];
    if (!e.is_number()) fail(where, "non-numeric entry");
    v(i) = e.get<double>();
  }
  return v;
}

Index dim_field(const json& doc, const char* key, Index min_value) {
  const json& v = field(doc, key, "model");
  if (!v.is_number_integer() || v.get<long long>() < min_value) {
    fail("model", std::string("'") + key + "' must be an integer >= " + std::to_string(min_value));
  }
  return static_cast<Index>(v.get<long long>());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string model_to_json(const JmlsModel& model) {
  json doc;
  doc["n_x"] = model.nx;
  doc["n_u"] = model.nu;
  doc["n_y"] = model.ny;
  doc["m"] = model.m();
  doc["convention"] = to_string(model.convention);
  doc["T_layout"] = "column-stochastic: T[j][i] = P(z_{k+1} = j | z_k = i), rows listed first";
  doc["T"] = matrix_to_json(model.T);
  json modes = json::array();
  for (const auto& p : model.modes) {
    modes.push_back({{"A", matrix_to_json(p.A)},
                     {"B", matrix_to_json(p.B)},
                     {"C", matrix_to_json(p.C)},
                     {"D", matrix_to_json(p.D)},
                     {"Pi_half", matrix_to_json(p.Pi_half.matrix())}});
  }
  doc["modes"] = std::move(modes);
  json prior_modes = json::array();
  for (std::size_t z = 0; z < model.prior.mode_count(); ++z) {
    json comps = json::array();
    for (const auto& c : model.prior.mode(z)) {
      comps.push_back(
          {{"weight", std::exp(c.log_w)}, {"mean", vector_to_json(c.mu)}, {"P_half", matrix_to_json(c.P_half.matrix())}});
    }
    prior_modes.push_back(std::move(comps));
  }
  doc["prior"] = {{"modes", std::move(prior_modes)}};
  return doc.dump(2) + "\n";
}

JmlsModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
  JmlsModel model;
  model.nx = dim_field(doc, "n_x", 1);
  model.nu = dim_field(doc, "n_u", 0);
  model.ny = dim_field(doc, "n_y", 1);
  const Index m = dim_field(doc, "m", 1);
  if (doc.contains("convention")) {
    const json& c = doc.at("convention");
    if (!c.is_string()) fail("model", "'convention' must be a string");
    model.convention = convention_from_string(c.get<std::string>());
  }
  const Index nx = model.nx, nu = model.nu, ny = model.ny;
  model.T = matrix_from_json(field(doc, "T", "model"), m, m, "T");

  const json& modes = field(doc, "modes", "model");
  if (!modes.is_array() || static_cast<Index>(modes.size()) != m) fail("modes", "expected " + std::to_string(m) + " modes");
  for (Index z = 0; z < m; ++z) {
    const json& jm = modes[static_cast<std::size_t>(z)];
    const std::string where = "modes[" + std::to_string(z + 1) + "]";
    Matrix A = matrix_from_json(field(jm, "A", where), nx, nx, where + ".A");
    Matrix B = matrix_from_json(field(jm, "B", where), nx, nu, where + ".B");
    Matrix C = matrix_from_json(field(jm, "C", where), ny, nx, where + ".C");
    Matrix D = matrix_from_json(field(jm, "D", where), ny, nu, where + ".D");
    if (jm.contains("Pi_half")) {
      UtFactor f(matrix_from_json(jm.at("Pi_half"), ny + nx, ny + nx, where + ".Pi_half"));
      model.modes.push_back(ModeParams{std::move(A), std::move(B), std::move(C), std::move(D), std::move(f)});
    } else {
      const Matrix Q = matrix_from_json(field(jm, "Q", where), nx, nx, where + ".Q");
      const Matrix R = matrix_from_json(field(jm, "R", where), ny, ny, where + ".R");
      const Matrix S = jm.contains("S") ? matrix_from_json(jm.at("S"), nx, ny, where + ".S") : Matrix::Zero(nx, ny);
      model.modes.push_back(ModeParams::from_covariances(std::move(A), std::move(B), std::move(C), std::move(D), Q, R, S));
    }
  }

  const json& prior_modes = field(field(doc, "prior", "model"), "modes", "prior");
  if (!prior_modes.is_array() || static_cast<Index>(prior_modes.size()) != m) {
    fail("prior", "expected " + std::to_string(m) + " mode lists");
  }
  model.prior = HybridMixture(static_cast<std::size_t>(m));
  for (Index z = 0; z < m; ++z) {
    const json& comps = prior_modes[static_cast<std::size_t>(z)];
    if (!comps.is_array()) fail("prior", "mode lists must be arrays");
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string where = "prior.modes[" + std::to_string(z + 1) + "][" + std::to_string(i + 1) + "]";
      const json& jw = field(comps[i], "weight", where);
      if (!jw.is_number() || jw.get<double>() < 0.0) fail(where, "weight must be a nonnegative number");
      GaussianComponent c;
      c.log_w = std::log(jw.get<double>());
      c.mu = vector_from_json(field(comps[i], "mean", where), nx, where + ".mean");
      if (comps[i].contains("P_half")) {
        c.P_half = UtFactor(matrix_from_json(comps[i].at("P_half"), nx, nx, where + ".P_half"));
      } else {
        c.P_half = chol_upper(matrix_from_json(field(comps[i], "P", where), nx, nx, where + ".P"));
      }
      model.prior.mode(static_cast<std::size_t>(z)).push_back(std::move(c));
    }
  }
  return model;
}

void save_model(const std::filesystem::path& path, const JmlsModel& model) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << model_to_json(model);
  if (!os) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

JmlsModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open model file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return model_from_json(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  const Index N = data.length();
  const bool truth = data.x.has_value() && data.z.has_value();
  const Index nx = truth ? data.x->cols() : 0;
  os << "k";
  for (Index i = 0; i < data.nu(); ++i) os << ",u" << i + 1;
  for (Index i = 0; i < data.ny(); ++i) os << ",y" << i + 1;
  if (truth) {
    os << ",z";
    for (Index i = 0; i < nx; ++i) os << ",x" << i + 1;
  }
  os << "\n";
  for (Index k = 0; k < N; ++k) {
    os << k + 1;
    for (Index i = 0; i < data.nu(); ++i) os << "," << format_double(data.u(k, i));
    for (Index i = 0; i < data.ny(); ++i) os << "," << format_double(data.y(k, i));
    if (truth) {
      os << "," << (*data.z)[static_cast<std::size_t>(k)] + 1;
      for (Index i = 0; i < nx; ++i) os << "," << format_double((*data.x)(k, i));
    }
    os << "\n";
  }
}

Dataset read_dataset_csv(std::istream& is, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::Parse, source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.empty() || header[0] != "k") throw Error(ErrorCode::Parse, source + ":1: header must start with 'k'");
  Index nu = 0, ny = 0, nx = 0;
  bool has_z = false;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string& h = header[c];
    auto numbered = [&](char prefix, Index expected) {
      return h.size() > 1 && h[0] == prefix && h.substr(1) == std::to_string(expected);
    };
    if (!has_z && nx == 0 && ny == 0 && numbered('u', nu + 1)) {
      ++nu;
    } else if (!has_z && numbered('y', ny + 1)) {
      ++ny;
    } else if (!has_z && h == "z") {
      has_z = true;
    } else if (has_z && numbered('x', nx + 1)) {
      ++nx;
    } else {
      throw Error(ErrorCode::Parse, source + ":1: unexpected column '" + h + "'");
    }
  }
  if (ny == 0) throw Error(ErrorCode::Parse, source + ":1: no output columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> z;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::Parse, source + ":" + std::to_string(lineno) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      char* end = nullptr;
      vals[c] = std::strtod(cells[c].c_str(), &end);
      if (cells[c].empty() || end != cells[c].c_str() + cells[c].size()) {
        throw Error(ErrorCode::Parse, source + ":" + std::to_string(lineno) + ": bad number '" + cells[c] + "' in column " +
                                          header[c]);
      }
    }
    if (vals[0] != static_cast<double>(rows.size() + 1)) {
      throw Error(ErrorCode::Parse, source + ":" + std::to_string(lineno) + ": k must count up from 1");
    }
    if (has_z) {
      const double zv = vals[static_cast<std::size_t>(1 + nu + ny)];
      if (zv < 1 || zv != std::floor(zv)) {
        throw Error(ErrorCode::Parse, source + ":" + std::to_string(lineno) + ": mode index must be a positive integer");
      }
      z.push_back(static_cast<std::size_t>(zv) - 1);
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw Error(ErrorCode::Parse, source + ": no data rows");

  const Index N = static_cast<Index>(rows.size());
  Dataset d;
  d.u.resize(N, nu);
  d.y.resize(N, ny);
  Matrix x(N, nx);
  for (Index k = 0; k < N; ++k) {
    const auto& r = rows[static_cast<std::size_t>(k)];
    for (Index i = 0; i < nu; ++i) d.u(k, i) = r[static_cast<std::size_t>(1 + i)];
    for (Index i = 0; i < ny; ++i) d.y(k, i) = r[static_cast<std::size_t>(1 + nu + i)];
    for (Index i = 0; i < nx; ++i) x(k, i) = r[static_cast<std::size_t>(2 + nu + ny + i)];
  }
  if (has_z) {
    d.z = std::move(z);
    d.x = std::move(x);
  }
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_dataset_csv(os, data);
  if (!os) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open dataset file " + path.string());
  return read_dataset_csv(is, path.string());
}

}  // namespace jmls
