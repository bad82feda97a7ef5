#include "etmpc/region.hpp"

#include <sstream>

#include "etmpc/error.hpp"
#include "etmpc/kernels.hpp"
#include "etmpc/lu.hpp"

namespace etmpc {

namespace {

void check_active_set(const CondensedQp& qp, const ActiveSet& aset) {
  if (aset.q() != static_cast<std::size_t>(qp.q()))
    throw Error(Errc::invalid_argument, "active set built for a different constraint count");
  if (static_cast<Eigen::Index>(aset.size()) > qp.dims.mN())
    throw Error(Errc::invalid_argument, "more active constraints than decision variables");
}

/// Shared tail of the A1/A2 schedules once V = Phi S_A and v = Phi w_A exist.
/// `gy_inactive` is G_I H^-1 G_A', `y_first` the first m rows of H^-1 G_A'.
Region assemble(const CondensedQp& qp, const ActiveSet& aset, const std::vector<std::size_t>& inactive,
                const Matrix& gy_inactive, const Matrix& y_first, const Matrix& k0, const Matrix& V,
                const Vector& v, FlopCounter* counter) {
  const Eigen::Index q = qp.q(), n = qp.n(), qa = static_cast<Eigen::Index>(aset.size());
  const Eigen::Index qi = q - qa;

  Region region;
  region.active = aset;
  region.T.resize(q, n);
  region.d.resize(q);

  // Inactive block: G_I Y Phi S_A - S_I  and  w_I - G_I Y Phi w_A.
  const Matrix top_t = counted::subtract(counted::multiply(gy_inactive, V, counter), select_rows(qp.S, inactive), counter);
  const Matrix top_dv = counted::subtract(select_entries(qp.w, inactive), counted::multiply(gy_inactive, v, counter), counter);
  region.T.topRows(qi) = top_t;
  region.d.head(qi) = top_dv.col(0);
  // Multiplier block: Phi S_A x <= -Phi w_A.
  region.T.bottomRows(qa) = V;
  region.d.tail(qa) = -v;

  region.K = counted::subtract(counted::multiply(y_first, V, counter), k0, counter);
  region.b = counted::multiply(y_first, v, counter).col(0);
  return region;
}

}  // namespace

std::string_view backend_name(BackendKind kind) noexcept {
  return kind == BackendKind::naive_inverse ? "naive" : "lu";
}

BackendKind parse_backend(std::string_view text) {
  if (text == "naive" || text == "naive-inverse") return BackendKind::naive_inverse;
  if (text == "lu" || text == "lu-pivoted") return BackendKind::lu_pivoted;
  throw Error(Errc::invalid_argument, "unknown backend '" + std::string(text) + "' (expected naive or lu)");
}

Region build_region(const CondensedQp& qp, const ActiveSet& aset, BackendKind backend, FlopCounter* counter) {
  check_active_set(qp, aset);
  const Eigen::Index m = qp.m();
  const auto rows = aset.indices();
  const std::vector<std::size_t> inactive = aset.inactive();
  const Matrix ga_t = select_rows(qp.G, rows).transpose();
  const Matrix sa = select_rows(qp.S, rows);
  const Vector wa = select_entries(qp.w, rows);

  if (backend == BackendKind::naive_inverse) {
    BucketScope matrix_scope(counter, FlopCounter::Bucket::matrix);
    // Y = H^-1 G_A'
    const Matrix y = counted::multiply(qp.Hinv, ga_t, counter);
    // G Y for all q rows: the active rows give G_A H^-1 G_A', the rest G_I Y.
    const Matrix gy = counted::multiply(qp.G, y, counter);
    const Matrix k0 = counted::multiply(qp.Hinv.topRows(m), qp.Ft, counter);
    Matrix phi;
    {
      BucketScope inv_scope(counter, FlopCounter::Bucket::inversion);
      phi = counted::gauss_jordan_inverse(select_rows(gy, rows), counter);
    }
    const Matrix V = counted::multiply(phi, sa, counter);
    const Vector v = counted::multiply(phi, Matrix(wa), counter).col(0);
    return assemble(qp, aset, inactive, select_rows(gy, inactive), y.topRows(m), k0, V, v, counter);
  }

  const Matrix y = qp.Hinv * ga_t;
  const Matrix gram = ga_t.transpose() * y;
  const PivotedLu lu(gram);
  const Matrix V = lu.solve(sa);
  const Vector v = lu.solve(wa);
  const Matrix k0 = qp.Hinv.topRows(m) * qp.Ft;
  return assemble(qp, aset, inactive, select_rows(qp.G, inactive) * y, y.topRows(m), k0, V, v, nullptr);
}

Region build_region_with_phi(const CondensedQp& qp, const ActiveSet& aset, const Matrix& phi, FlopCounter* counter) {
  check_active_set(qp, aset);
  const Eigen::Index qa = static_cast<Eigen::Index>(aset.size());
  if (phi.rows() != qa || phi.cols() != qa) {
    std::ostringstream os;
    os << "Phi is " << phi.rows() << "x" << phi.cols() << ", expected " << qa << "x" << qa;
    throw Error(Errc::dimension_mismatch, os.str());
  }
  BucketScope matrix_scope(counter, FlopCounter::Bucket::matrix);
  const Eigen::Index m = qp.m();
  const auto rows = aset.indices();
  const std::vector<std::size_t> inactive = aset.inactive();
  const Matrix y = counted::multiply(qp.Hinv, select_rows(qp.G, rows).transpose(), counter);
  // Only the inactive rows of G Y are needed when Phi is given.
  const Matrix gy_inactive = counted::multiply(select_rows(qp.G, inactive), y, counter);
  const Matrix k0 = counted::multiply(qp.Hinv.topRows(m), qp.Ft, counter);
  const Matrix V = counted::multiply(phi, select_rows(qp.S, rows), counter);
  const Vector v = counted::multiply(phi, Matrix(select_entries(qp.w, rows)), counter).col(0);
  return assemble(qp, aset, inactive, gy_inactive, y.topRows(m), k0, V, v, counter);
}

Vector evaluate_law(const Region& region, const Vector& x) {
  if (x.size() != region.K.cols()) throw Error(Errc::dimension_mismatch, "law evaluated at a state of wrong length");
  Vector u(region.K.rows());
  kernels::affine({region.K.data(), static_cast<std::size_t>(region.K.rows()), static_cast<std::size_t>(region.K.cols()),
                   static_cast<std::size_t>(region.K.cols())},
                  {x.data(), static_cast<std::size_t>(x.size())},
                  {region.b.data(), static_cast<std::size_t>(region.b.size())},
                  {u.data(), static_cast<std::size_t>(u.size())});
  return u;
}

bool contains(const Region& region, const Vector& x) {
  if (x.size() != region.T.cols()) throw Error(Errc::dimension_mismatch, "membership test with a state of wrong length");
  return kernels::halfspace_contains(
      {region.T.data(), static_cast<std::size_t>(region.T.rows()), static_cast<std::size_t>(region.T.cols()),
       static_cast<std::size_t>(region.T.cols())},
      {x.data(), static_cast<std::size_t>(x.size())}, {region.d.data(), static_cast<std::size_t>(region.d.size())},
      kMembershipTolerance);
}

double region_distance(const Region& a, const Region& b) {
  if (a.K.rows() != b.K.rows() || a.K.cols() != b.K.cols() || a.T.rows() != b.T.rows() || a.T.cols() != b.T.cols())
    throw Error(Errc::dimension_mismatch, "regions have different shapes");
  auto maxabs = [](const auto& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; };
  return std::max({maxabs(a.K - b.K), maxabs(a.b - b.b), maxabs(a.T - b.T), maxabs(a.d - b.d)});
}

}  // namespace etmpc
