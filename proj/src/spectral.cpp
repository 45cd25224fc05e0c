#include "kvflow/spectral.hpp"

#include "kvflow/errors.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace kvflow {

namespace {

constexpr double kPi = std::numbers::pi;

int dealiased_points(int modes) { return (3 * modes + 1) / 2; }

double mode_value(bool sine, int k, double length, double x) {
  if (sine) {
    return k == 0 ? 0.0 : std::sqrt(2.0 / length) * std::sin(k * kPi * x / length);
  }
  const double norm = k == 0 ? std::sqrt(1.0 / length) : std::sqrt(2.0 / length);
  return norm * std::cos(k * kPi * x / length);
}

double mode_derivative(bool sine, int k, double length, double x) {
  const double kk = k * kPi / length;
  if (sine) {
    return k == 0 ? 0.0 : std::sqrt(2.0 / length) * kk * std::cos(kk * x);
  }
  return k == 0 ? 0.0 : -std::sqrt(2.0 / length) * kk * std::sin(kk * x);
}

struct GslTable {
  explicit GslTable(int n) : table(gsl_integration_glfixed_table_alloc(static_cast<size_t>(n))) {}
  ~GslTable() { gsl_integration_glfixed_table_free(table); }
  GslTable(const GslTable&) = delete;
  GslTable& operator=(const GslTable&) = delete;
  gsl_integration_glfixed_table* table;
};

EdgeQuadrature make_edge(Edge e, const Domain& d, int n) {
  GslTable gl(n);
  EdgeQuadrature q;
  q.edge = e;
  q.weights.resize(n);
  q.points.resize(static_cast<size_t>(n));
  const bool horizontal = (e == Edge::bottom || e == Edge::top);
  const double length = horizontal ? d.lx : d.ly;
  for (int i = 0; i < n; ++i) {
    double xi = 0.0;
    double wi = 0.0;
    gsl_integration_glfixed_point(0.0, length, static_cast<size_t>(i), &xi, &wi, gl.table);
    q.weights(i) = wi;
    switch (e) {
      case Edge::bottom: q.points[i] = Vec2(xi, 0.0); break;
      case Edge::top: q.points[i] = Vec2(xi, d.ly); break;
      case Edge::left: q.points[i] = Vec2(0.0, xi); break;
      case Edge::right: q.points[i] = Vec2(d.lx, xi); break;
    }
  }
  return q;
}

}  // namespace

void Domain::validate() const {
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw ConfigError("domain lengths must be positive and finite");
  }
}

Vec2 outward_normal(Edge e) {
  switch (e) {
    case Edge::bottom: return {0.0, -1.0};
    case Edge::right: return {1.0, 0.0};
    case Edge::top: return {0.0, 1.0};
    case Edge::left: return {-1.0, 0.0};
  }
  return {0.0, 0.0};
}

const char* family_name(Family f) {
  switch (f) {
    case Family::cc: return "cc";
    case Family::sc: return "sc";
    case Family::cs: return "cs";
    case Family::ss: return "ss";
  }
  return "?";
}

Basis::Basis(Domain domain, int nx, int ny, int mx, int my) : domain_(domain) {
  domain_.validate();
  if (nx < 1 || ny < 1) throw ConfigError("mode counts must be positive");
  if (mx <= 0) mx = dealiased_points(nx);
  if (my <= 0) my = dealiased_points(ny);
  if (mx < dealiased_points(nx) || my < dealiased_points(ny)) {
    throw ConfigError("grid must satisfy M >= ceil(3N/2) (got " + std::to_string(mx) + "x" +
                      std::to_string(my) + " for " + std::to_string(nx) + "x" +
                      std::to_string(ny) + " modes)");
  }

  const std::array<double, 2> lengths{domain_.lx, domain_.ly};
  const std::array<int, 2> modes{nx, ny};
  const std::array<int, 2> points{mx, my};
  for (int a = 0; a < 2; ++a) {
    Axis& ax = axes_[a];
    ax.length = lengths[a];
    ax.modes = modes[a];
    ax.points = points[a];
    ax.weight = ax.length / ax.points;
    ax.nodes.resize(ax.points);
    for (int m = 0; m < ax.points; ++m) ax.nodes(m) = (m + 0.5) * ax.weight;
    ax.wavenumber.resize(ax.modes);
    for (int k = 0; k < ax.modes; ++k) ax.wavenumber(k) = k * kPi / ax.length;
    ax.cos_table = axis_table(a, false, ax.nodes);
    ax.sin_table = axis_table(a, true, ax.nodes);
    ax.cos_weighted = ax.weight * ax.cos_table;
    ax.sin_weighted = ax.weight * ax.sin_table;
  }

  const Eigen::VectorXd& kx = axes_[0].wavenumber;
  const Eigen::VectorXd& ky = axes_[1].wavenumber;
  eigenvalues_ = kx.array().square().matrix() * Eigen::RowVectorXd::Ones(ny) +
                 Eigen::VectorXd::Ones(nx) * ky.array().square().matrix().transpose();

  for (unsigned fi = 0; fi < 4; ++fi) {
    const auto f = static_cast<Family>(fi);
    // d/dx cos(kx) = -k sin(kx); d/dx sin(kx) = k cos(kx); normalisations agree for k >= 1.
    const Eigen::VectorXd sx = sine_x(f) ? kx : Eigen::VectorXd(-kx);
    const Eigen::VectorXd sy = sine_y(f) ? ky : Eigen::VectorXd(-ky);
    factors_[fi][0] = sx * Eigen::RowVectorXd::Ones(ny);
    factors_[fi][1] = Eigen::VectorXd::Ones(nx) * sy.transpose();
    Coeffs m = Coeffs::Ones(nx, ny);
    if (sine_x(f)) m.row(0).setZero();
    if (sine_y(f)) m.col(0).setZero();
    masks_[fi] = m;
  }

  for (Edge e : kEdges) {
    const bool horizontal = (e == Edge::bottom || e == Edge::top);
    const int n = (horizontal ? mx : my) + 16;
    edges_[static_cast<std::size_t>(e)] = make_edge(e, domain_, n);
  }
}

Eigen::MatrixXd Basis::axis_table(int axis, bool sine, const Eigen::VectorXd& coords) const {
  const double length = axis == 0 ? domain_.lx : domain_.ly;
  const int n = axis == 0 ? axes_[0].modes : axes_[1].modes;
  Eigen::MatrixXd t(coords.size(), n);
  for (Eigen::Index p = 0; p < coords.size(); ++p) {
    for (int k = 0; k < n; ++k) t(p, k) = mode_value(sine, k, length, coords(p));
  }
  return t;
}

Eigen::MatrixXd Basis::axis_derivative_table(int axis, bool sine, const Eigen::VectorXd& coords) const {
  const double length = axis == 0 ? domain_.lx : domain_.ly;
  const int n = axis == 0 ? axes_[0].modes : axes_[1].modes;
  Eigen::MatrixXd t(coords.size(), n);
  for (Eigen::Index p = 0; p < coords.size(); ++p) {
    for (int k = 0; k < n; ++k) t(p, k) = mode_derivative(sine, k, length, coords(p));
  }
  return t;
}

Grid Basis::synthesize(const Coeffs& c, Family f) const {
  if (c.rows() != nx() || c.cols() != ny()) throw ConfigError("coefficient array has wrong shape");
  return table(0, sine_x(f)) * c * table(1, sine_y(f)).transpose();
}

Coeffs Basis::project(const Grid& g, Family f) const {
  if (g.rows() != mx() || g.cols() != my()) throw ConfigError("grid array has wrong shape");
  return weighted(0, sine_x(f)).transpose() * g * weighted(1, sine_y(f));
}

Coeffs Basis::derivative(const Coeffs& c, Family f, int axis) const {
  return c.cwiseProduct(derivative_factor(f, axis));
}

Family Basis::derived_family(Family test, std::initializer_list<int> axes) {
  for (int a : axes) test = flip(test, a);
  return test;
}

Coeffs Basis::weak_pairing(Coeffs projected, Family test, std::initializer_list<int> axes) const {
  Family f = test;
  for (int a : axes) {
    projected.array() *= derivative_factor(f, a).array();
    f = flip(f, a);
  }
  return projected.cwiseProduct(mask(test));
}

double Basis::integrate(const Grid& g) const {
  // Row sums first, then the column total: fixed order regardless of storage.
  double total = 0.0;
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    double col = 0.0;
    for (Eigen::Index i = 0; i < g.rows(); ++i) col += g(i, j);
    total += col;
  }
  return total * cell_weight();
}

double Basis::evaluate(const Coeffs& c, Family f, double x, double y) const {
  Eigen::VectorXd px(1), py(1);
  px << x;
  py << y;
  const Eigen::RowVectorXd tx = axis_table(0, sine_x(f), px).row(0);
  const Eigen::RowVectorXd ty = axis_table(1, sine_y(f), py).row(0);
  return (tx * c * ty.transpose())(0, 0);
}

std::pair<double, Vec2> Basis::evaluate_with_gradient(const Coeffs& c, Family f, double x,
                                                      double y) const {
  Eigen::VectorXd px(1), py(1);
  px << x;
  py << y;
  const Eigen::RowVectorXd tx = axis_table(0, sine_x(f), px).row(0);
  const Eigen::RowVectorXd ty = axis_table(1, sine_y(f), py).row(0);
  const Eigen::RowVectorXd dx = axis_derivative_table(0, sine_x(f), px).row(0);
  const Eigen::RowVectorXd dy = axis_derivative_table(1, sine_y(f), py).row(0);
  const Eigen::VectorXd cy = c * ty.transpose();
  const double value = tx * cy;
  const double gx = dx * cy;
  const double gy = (tx * c * dy.transpose())(0, 0);
  return {value, Vec2(gx, gy)};
}

TensorField TensorField::from_coeffs(int rank, std::vector<Family> families, std::vector<Coeffs> coeffs) {
  if (families.size() != coeffs.size()) throw ConfigError("family/component count mismatch");
  TensorField t;
  t.rank = rank;
  t.families = std::move(families);
  t.coeffs = std::move(coeffs);
  t.coeffs_current = true;
  return t;
}

TensorField TensorField::from_grids(int rank, std::vector<Family> families, std::vector<Grid> grids) {
  if (families.size() != grids.size()) throw ConfigError("family/component count mismatch");
  TensorField t;
  t.rank = rank;
  t.families = std::move(families);
  t.grids = std::move(grids);
  t.grids_current = true;
  return t;
}

TensorField transform_forward(const Basis& basis, const TensorField& f) {
  if (f.coeffs_current) return f;
  if (!f.grids_current) throw ConfigError("field has no current representation");
  TensorField out = f;
  out.coeffs.resize(f.size());
  for (std::size_t c = 0; c < f.size(); ++c) out.coeffs[c] = basis.project(f.grids[c], f.families[c]);
  out.coeffs_current = true;
  return out;
}

TensorField transform_inverse(const Basis& basis, const TensorField& f) {
  if (f.grids_current) return f;
  if (!f.coeffs_current) throw ConfigError("field has no current representation");
  TensorField out = f;
  out.grids.resize(f.size());
  for (std::size_t c = 0; c < f.size(); ++c) out.grids[c] = basis.synthesize(f.coeffs[c], f.families[c]);
  out.grids_current = true;
  return out;
}

TensorField gradient(const Basis& basis, const TensorField& f) {
  const TensorField src = transform_forward(basis, f);
  std::vector<Family> fams;
  std::vector<Coeffs> cs;
  for (std::size_t c = 0; c < src.size(); ++c) {
    for (int axis = 0; axis < 2; ++axis) {
      fams.push_back(flip(src.families[c], axis));
      cs.push_back(basis.derivative(src.coeffs[c], src.families[c], axis));
    }
  }
  return TensorField::from_coeffs(src.rank + 1, std::move(fams), std::move(cs));
}

TensorField dealiased_product(const Basis& basis, const TensorField& f, const TensorField& g) {
  const TensorField a = transform_inverse(basis, f);
  const TensorField b = transform_inverse(basis, g);
  const bool broadcast_a = a.rank == 0 && b.rank > 0;
  const bool broadcast_b = b.rank == 0 && a.rank > 0;
  if (!broadcast_a && !broadcast_b && a.size() != b.size()) {
    throw ConfigError("dealiased_product: component count mismatch");
  }
  const std::size_t n = broadcast_a ? b.size() : a.size();
  TensorField out;
  out.rank = std::max(a.rank, b.rank);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t ia = broadcast_a ? 0 : c;
    const std::size_t ib = broadcast_b ? 0 : c;
    const Family fam = product_family(a.families[ia], b.families[ib]);
    const Grid prod = a.grids[ia].cwiseProduct(b.grids[ib]);
    out.families.push_back(fam);
    out.coeffs.push_back(basis.project(prod, fam));
  }
  out.coeffs_current = true;
  return out;
}

double integrate(const Basis& basis, const TensorField& f) {
  if (f.rank != 0 || f.size() != 1) throw ConfigError("integrate expects a scalar field");
  if (f.grids_current) return basis.integrate(f.grids[0]);
  return basis.integrate(basis.synthesize(f.coeffs[0], f.families[0]));
}

BoundaryData BoundaryData::zero(const Basis& basis) {
  BoundaryData d;
  for (Edge e : kEdges) {
    const auto i = static_cast<std::size_t>(e);
    d.values[i].assign(basis.edge_quadrature(e).points.size(), Vec2::Zero());
  }
  return d;
}

double boundary_integrate(const Basis& basis, const BoundaryData& g, const TensorField& f) {
  if (f.rank != 1 || f.size() != 2) throw ConfigError("boundary_integrate expects a vector field");
  const TensorField v = transform_forward(basis, f);
  double scale = 0.0;
  for (const auto& edge : g.values) {
    for (const Vec2& gv : edge) scale = std::max(scale, gv.norm());
  }
  double total = 0.0;
  for (Edge e : kEdges) {
    const auto ei = static_cast<std::size_t>(e);
    const EdgeQuadrature& q = basis.edge_quadrature(e);
    if (g.values[ei].size() != q.points.size()) {
      throw ValidationError("boundary data has wrong node count on an edge");
    }
    const Vec2 n = outward_normal(e);
    for (std::size_t p = 0; p < q.points.size(); ++p) {
      const Vec2& gv = g.values[ei][p];
      if (std::abs(gv.dot(n)) > 1e-12 * std::max(scale, 1.0)) {
        throw ValidationError("boundary traction must be tangential (g.n = 0)");
      }
      const Vec2& x = q.points[p];
      const double f1 = basis.evaluate(v.coeffs[0], v.families[0], x.x(), x.y());
      const double f2 = basis.evaluate(v.coeffs[1], v.families[1], x.x(), x.y());
      total += q.weights(static_cast<Eigen::Index>(p)) * (gv.x() * f1 + gv.y() * f2);
    }
  }
  return total;
}

}  // namespace kvflow
