#pragma once

// Sine/cosine tensor-product Galerkin spaces on an axis-aligned rectangle.
//
// Every scalar field is expanded in one of four parity families
//
//   cc: cos(i pi x/Lx) cos(j pi y/Ly)   (homogeneous Neumann on all edges)
//   sc: sin(i pi x/Lx) cos(j pi y/Ly)   (vanishes on x = 0, Lx)
//   cs: cos(i pi x/Lx) sin(j pi y/Ly)   (vanishes on y = 0, Ly)
//   ss: sin(i pi x/Lx) sin(j pi y/Ly)   (vanishes on the whole boundary)
//
// with i in [0, Nx), j in [0, Ny). Sine modes with index 0 are identically
// zero and their coefficients are always zero. Modes are L2-normalised, so
// the mass matrix of every family is the identity. Differentiation along an
// axis swaps sine and cosine on that axis and is diagonal in mode space.
//
// Grid values live on the cell-centred Mx x My grid x_m = (m + 1/2) Lx / Mx.
// The midpoint rule on that grid integrates cos(k pi x / Lx) exactly for
// k < 2 Mx, which makes projections of quadratic products of in-span fields
// exact and integrals of cubic products exact when Mx >= ceil(3 Nx / 2).

#include <Eigen/Dense>

#include <array>
#include <initializer_list>
#include <vector>

namespace kvflow {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;
/// Grid values, row index along x.
using Grid = Eigen::MatrixXd;
/// Mode coefficients, row index = x mode number.
using Coeffs = Eigen::MatrixXd;

struct Domain {
  double lx = 1.0;
  double ly = 1.0;

  void validate() const;
  bool operator==(const Domain&) const = default;
};

enum class Edge { bottom, right, top, left };
inline constexpr std::array<Edge, 4> kEdges{Edge::bottom, Edge::right, Edge::top, Edge::left};

Vec2 outward_normal(Edge e);

enum class Family : unsigned { cc = 0, sc = 1, cs = 2, ss = 3 };

constexpr bool sine_x(Family f) { return (static_cast<unsigned>(f) & 1u) != 0; }
constexpr bool sine_y(Family f) { return (static_cast<unsigned>(f) & 2u) != 0; }
constexpr bool sine_on(Family f, int axis) { return axis == 0 ? sine_x(f) : sine_y(f); }
constexpr Family flip(Family f, int axis) {
  return static_cast<Family>(static_cast<unsigned>(f) ^ (axis == 0 ? 1u : 2u));
}
/// Parity family of a pointwise product.
constexpr Family product_family(Family a, Family b) {
  return static_cast<Family>(static_cast<unsigned>(a) ^ static_cast<unsigned>(b));
}
const char* family_name(Family f);

/// Points and weights of a 1D quadrature along one boundary edge.
struct EdgeQuadrature {
  Edge edge;
  std::vector<Vec2> points;
  Eigen::VectorXd weights;
};

class Basis {
 public:
  /// mx, my <= 0 select the dealiasing default ceil(3N/2).
  Basis(Domain domain, int nx, int ny, int mx = 0, int my = 0);

  const Domain& domain() const { return domain_; }
  int nx() const { return axes_[0].modes; }
  int ny() const { return axes_[1].modes; }
  int mx() const { return axes_[0].points; }
  int my() const { return axes_[1].points; }
  const Eigen::VectorXd& nodes(int axis) const { return axes_[axis].nodes; }
  double cell_weight() const { return axes_[0].weight * axes_[1].weight; }

  Grid synthesize(const Coeffs& c, Family f) const;
  /// L2 projection by quadrature on the grid.
  Coeffs project(const Grid& g, Family f) const;

  /// Exact derivative of the expansion; result lives in flip(f, axis).
  Coeffs derivative(const Coeffs& c, Family f, int axis) const;
  /// Multiplier m such that d/d(axis) of mode (i,j) of f equals m(i,j) times mode (i,j) of flip(f, axis).
  const Coeffs& derivative_factor(Family f, int axis) const {
    return factors_[static_cast<unsigned>(f)][axis];
  }
  /// Given the projection of g onto the family reached from `test` after the
  /// listed derivatives, returns the coefficients of  int g * d^axes(psi_m) dx
  /// for every test mode psi_m of `test`.
  Coeffs weak_pairing(Coeffs projected, Family test, std::initializer_list<int> axes) const;
  /// Family reached from `test` after applying the listed derivatives.
  static Family derived_family(Family test, std::initializer_list<int> axes);

  /// Laplacian eigenvalues (i pi/Lx)^2 + (j pi/Ly)^2.
  const Coeffs& eigenvalues() const { return eigenvalues_; }
  /// 1 for modes that exist in the family, 0 for null sine modes.
  const Coeffs& mask(Family f) const { return masks_[static_cast<unsigned>(f)]; }

  /// Tensor-product midpoint quadrature; deterministic summation order.
  double integrate(const Grid& g) const;

  /// Values of the 1D modes of `axis` at arbitrary coordinates (rows = points).
  Eigen::MatrixXd axis_table(int axis, bool sine, const Eigen::VectorXd& coords) const;
  /// Same, for the first derivative.
  Eigen::MatrixXd axis_derivative_table(int axis, bool sine, const Eigen::VectorXd& coords) const;
  double evaluate(const Coeffs& c, Family f, double x, double y) const;
  /// Value and gradient of the expansion at a point.
  std::pair<double, Vec2> evaluate_with_gradient(const Coeffs& c, Family f, double x, double y) const;

  /// Gauss-Legendre nodes along an edge (ordered by increasing coordinate).
  const EdgeQuadrature& edge_quadrature(Edge e) const {
    return edges_[static_cast<std::size_t>(e)];
  }

 private:
  struct Axis {
    double length = 1.0;
    int modes = 0;
    int points = 0;
    double weight = 0.0;
    Eigen::VectorXd nodes;
    Eigen::VectorXd wavenumber;
    Eigen::MatrixXd cos_table;  // points x modes
    Eigen::MatrixXd sin_table;
    Eigen::MatrixXd cos_weighted;  // weight * table, used for projection
    Eigen::MatrixXd sin_weighted;
  };

  const Eigen::MatrixXd& table(int axis, bool sine) const {
    return sine ? axes_[axis].sin_table : axes_[axis].cos_table;
  }
  const Eigen::MatrixXd& weighted(int axis, bool sine) const {
    return sine ? axes_[axis].sin_weighted : axes_[axis].cos_weighted;
  }

  Domain domain_;
  std::array<Axis, 2> axes_;
  Coeffs eigenvalues_;
  std::array<std::array<Coeffs, 2>, 4> factors_;
  std::array<Coeffs, 4> masks_;
  std::array<EdgeQuadrature, 4> edges_;
};

/// A rank-0/1/2 field stored component-wise (row-major over tensor indices),
/// carrying grid values and/or mode coefficients per component.
struct TensorField {
  int rank = 0;
  std::vector<Family> families;
  std::vector<Coeffs> coeffs;
  std::vector<Grid> grids;
  bool coeffs_current = false;
  bool grids_current = false;

  std::size_t size() const { return families.size(); }

  static TensorField from_coeffs(int rank, std::vector<Family> families, std::vector<Coeffs> coeffs);
  static TensorField from_grids(int rank, std::vector<Family> families, std::vector<Grid> grids);
};

/// Coefficients current after the call (grid values are kept).
TensorField transform_forward(const Basis& basis, const TensorField& f);
/// Grid values current after the call.
TensorField transform_inverse(const Basis& basis, const TensorField& f);
/// Rank+1 field; component (c, axis) stored at index 2*c + axis.
TensorField gradient(const Basis& basis, const TensorField& f);
/// Pointwise product on the grid, projected onto the product families.
/// A rank-0 operand multiplies every component of the other.
TensorField dealiased_product(const Basis& basis, const TensorField& f, const TensorField& g);
/// Integral of a scalar field over the rectangle.
double integrate(const Basis& basis, const TensorField& f);

/// Traction samples at the Gauss nodes of each edge (order of kEdges).
struct BoundaryData {
  std::array<std::vector<Vec2>, 4> values;

  static BoundaryData zero(const Basis& basis);
};

/// Sum over the four edges of int g . f dS. Rejects non-tangential g.
double boundary_integrate(const Basis& basis, const BoundaryData& g, const TensorField& f);

}  // namespace kvflow
