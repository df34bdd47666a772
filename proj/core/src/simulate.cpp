#include "jmls/simulate.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <sstream>

#include "jmls/random.hpp"

namespace jmls {

double Rng::uniform() {
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * uniform()); }

namespace {

Vector normals(Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

}  // namespace

void check_dimensions(const JmlsModel& model, const Dataset& data) {
  if (data.length() < 1) throw Error(ErrorCode::EmptyInput, "dataset has no time steps");
  if (data.u.rows() != data.y.rows() || data.nu() != model.nu || data.ny() != model.ny) {
    std::ostringstream os;
    os << "dataset is u " << data.u.rows() << "x" << data.nu() << ", y " << data.y.rows() << "x" << data.ny()
       << " but the model has nu = " << model.nu << ", ny = " << model.ny;
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

Vector transition_input(const Dataset& data, Convention convention, Index k) {
  const Index nu = data.nu(), ny = data.ny();
  Vector ub(nu + ny);
  if (convention == Convention::dynamic) {
    ub.head(nu) = data.u.row(k).transpose();
  } else if (k + 1 < data.length()) {
    ub.head(nu) = data.u.row(k + 1).transpose();
  } else {
    ub.head(nu).setZero();
  }
  ub.tail(ny) = data.y.row(k).transpose();
  return ub;
}

Dataset simulate(const JmlsModel& model, const InputSpec& inputs, Index N, std::uint64_t seed) {
  if (const auto issues = validate(model); !issues.empty()) throw Error(ErrorCode::InvalidModel, issues.front());
  if (N < 1) throw Error(ErrorCode::EmptyInput, "N must be at least 1");
  const Index nx = model.nx, nu = model.nu, ny = model.ny;
  Rng rng(seed);

  Dataset d;
  d.seed = seed;
  d.convention = model.convention;
  switch (inputs.law) {
    case InputLaw::iid_normal:
      d.u.resize(N, nu);
      for (Index k = 0; k < N; ++k)
        for (Index i = 0; i < nu; ++i) d.u(k, i) = rng.normal();
      break;
    case InputLaw::zero:
      d.u = Matrix::Zero(N, nu);
      break;
    case InputLaw::given:
      if (inputs.u.rows() != N || inputs.u.cols() != nu)
        throw Error(ErrorCode::DimensionMismatch, "given inputs must be N x nu");
      d.u = inputs.u;
      break;
  }

  std::vector<double> prior_w;
  std::vector<std::pair<std::size_t, std::size_t>> prior_idx;
  for (std::size_t z = 0; z < model.m(); ++z) {
    for (std::size_t i = 0; i < model.prior.mode(z).size(); ++i) {
      prior_w.push_back(std::exp(model.prior.mode(z)[i].log_w));
      prior_idx.emplace_back(z, i);
    }
  }
  const auto [z1, c1] = prior_idx[rng.categorical(prior_w)];
  const GaussianComponent& pc = model.prior.mode(z1)[c1];

  Matrix x(N + 1, nx);
  std::vector<std::size_t> z(N);
  d.y.resize(N, ny);
  x.row(0) = (pc.mu + pc.P_half.matrix().transpose() * normals(rng, nx)).transpose();
  std::size_t zk = z1;
  for (Index k = 0; k < N; ++k) {
    z[k] = zk;
    const std::size_t znext = rng.categorical(model.T.col(static_cast<Index>(zk)));
    const Vector n = normals(rng, ny + nx);
    const ModeParams& meas = model.modes[zk];
    const Vector xk = x.row(k).transpose();
    const Vector uk = d.u.row(k).transpose();
    if (model.convention == Convention::dynamic) {
      const Vector ev = meas.Pi_half.matrix().transpose() * n;
      d.y.row(k) = (meas.C * xk + meas.D * uk + ev.head(ny)).transpose();
      x.row(k + 1) = (meas.A * xk + meas.B * uk + ev.tail(nx)).transpose();
    } else {
      const ModeParams& dyn = model.modes[znext];
      const Matrix& Fm = meas.Pi_half.matrix();
      const Matrix& Fd = dyn.Pi_half.matrix();
      const Vector e = Fm.topLeftCorner(ny, ny).transpose() * n.head(ny);
      const Vector v = Fd.bottomRightCorner(nx, nx).transpose() * n.tail(nx);
      const Vector unext = k + 1 < N ? Vector(d.u.row(k + 1).transpose()) : Vector::Zero(nu);
      d.y.row(k) = (meas.C * xk + meas.D * uk + e).transpose();
      x.row(k + 1) = (dyn.A * xk + dyn.B * unext + v).transpose();
    }
    zk = znext;
  }
  d.x = std::move(x);
  d.z = std::move(z);
  return d;
}

}  // namespace jmls
