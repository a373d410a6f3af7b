#include "stokesband/fem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "stokesband/errors.hpp"

namespace stokesband {

BasisEval eval_basis(BasisFamily family, Vec2 p) {
    const double tol = 1e-12;
    if (p.x < -tol || p.y < -tol || p.x + p.y > 1.0 + tol)
        throw out_of_domain_error("point outside reference triangle");

    double l1 = 1.0 - p.x - p.y, l2 = p.x, l3 = p.y;
    BasisEval out;
    if (family == BasisFamily::P1) {
        out.values = {l1, l2, l3};
        out.gradients = {{-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}};
        return out;
    }
    // P2: vertex functions l*(2l-1), edge functions 4*l_a*l_b for edges
    // 01, 12, 20.
    out.values = {l1 * (2.0 * l1 - 1.0), l2 * (2.0 * l2 - 1.0), l3 * (2.0 * l3 - 1.0),
                  4.0 * l1 * l2, 4.0 * l2 * l3, 4.0 * l3 * l1};
    Vec2 g1{-1.0, -1.0}, g2{1.0, 0.0}, g3{0.0, 1.0};
    out.gradients = {
        (4.0 * l1 - 1.0) * g1,
        (4.0 * l2 - 1.0) * g2,
        (4.0 * l3 - 1.0) * g3,
        4.0 * (l2 * g1 + l1 * g2),
        4.0 * (l3 * g2 + l2 * g3),
        4.0 * (l1 * g3 + l3 * g1),
    };
    return out;
}

P2DofMap::P2DofMap(const Mesh& mesh) {
    n_vertices = mesh.vertex_count();
    std::map<std::pair<int, int>, int> edge_ids;
    std::vector<int> edge_tris;
    triangle_edges.resize(mesh.triangle_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto [it, inserted] = edge_ids.try_emplace(key, static_cast<int>(edge_vertices.size()));
            if (inserted) {
                edge_vertices.push_back({key.first, key.second});
                edge_tris.push_back(0);
            }
            triangle_edges[t][e] = it->second;
            ++edge_tris[it->second];
        }
    }
    n_edges = static_cast<int>(edge_vertices.size());
    edge_on_boundary.resize(n_edges);
    for (int e = 0; e < n_edges; ++e) edge_on_boundary[e] = (edge_tris[e] == 1);
}

Vec2 StokesSystem::velocity_dof_position(int scalar_dof) const {
    if (scalar_dof < dofs.n_vertices) return mesh->vertices[scalar_dof];
    const auto& ev = dofs.edge_vertices[scalar_dof - dofs.n_vertices];
    return 0.5 * (mesh->vertices[ev[0]] + mesh->vertices[ev[1]]);
}

bool StokesSystem::velocity_dof_on_boundary(int scalar_dof) const {
    if (scalar_dof < dofs.n_vertices) return mesh->on_boundary[scalar_dof];
    return dofs.edge_on_boundary[scalar_dof - dofs.n_vertices];
}

namespace {

struct ElementGeometry {
    Vec2 p0;
    double jac[2][2];    // columns p1-p0, p2-p0
    double inv_t[2][2];  // inverse transpose of jac
    double det;          // 2 * area

    explicit ElementGeometry(const Mesh& mesh, int t) {
        const auto& tri = mesh.triangles[t];
        p0 = mesh.vertices[tri[0]];
        Vec2 d1 = mesh.vertices[tri[1]] - p0;
        Vec2 d2 = mesh.vertices[tri[2]] - p0;
        jac[0][0] = d1.x;
        jac[0][1] = d2.x;
        jac[1][0] = d1.y;
        jac[1][1] = d2.y;
        det = d1.x * d2.y - d1.y * d2.x;
        inv_t[0][0] = d2.y / det;
        inv_t[0][1] = -d1.y / det;
        inv_t[1][0] = -d2.x / det;
        inv_t[1][1] = d1.x / det;
    }

    Vec2 map(Vec2 ref) const {
        return {p0.x + jac[0][0] * ref.x + jac[0][1] * ref.y,
                p0.y + jac[1][0] * ref.x + jac[1][1] * ref.y};
    }
    Vec2 physical_gradient(Vec2 ref_grad) const {
        return {inv_t[0][0] * ref_grad.x + inv_t[0][1] * ref_grad.y,
                inv_t[1][0] * ref_grad.x + inv_t[1][1] * ref_grad.y};
    }
};

// Basis values/gradients pre-evaluated at the points of a rule.
struct TabulatedBasis {
    std::vector<BasisEval> at;
    explicit TabulatedBasis(BasisFamily family, const QuadratureRule& rule) {
        at.reserve(rule.size());
        for (const auto& p : rule.points) at.push_back(eval_basis(family, p));
    }
};

} // namespace

StokesSystem assemble_stokes(const Mesh& mesh, const VectorFunction& load) {
    StokesSystem sys;
    sys.mesh = &mesh;
    sys.dofs = P2DofMap(mesh);
    const int n2 = sys.dofs.dof_count();
    const int n1 = mesh.vertex_count();

    const QuadratureRule rule = quadrature_rule(4);   // exact for all block integrands
    const QuadratureRule load_rule = quadrature_rule(6);
    const TabulatedBasis p2(BasisFamily::P2, rule);
    const TabulatedBasis p1(BasisFamily::P1, rule);
    const TabulatedBasis p2_load(BasisFamily::P2, load_rule);

    TripletBuilder a_trip(2 * n2, 2 * n2);
    TripletBuilder b_trip(n1, 2 * n2);
    TripletBuilder m_trip(n1, n1);
    sys.f_vec.assign(2 * n2, 0.0);

    for (int t = 0; t < mesh.triangle_count(); ++t) {
        ElementGeometry geom(mesh, t);
        if (geom.det * 0.5 < 1e-14)
            throw assembly_error("degenerate triangle " + std::to_string(t));
        const auto& tri = mesh.triangles[t];
        std::array<int, 6> vdof = {tri[0], tri[1], tri[2],
                                   n1 + sys.dofs.triangle_edges[t][0],
                                   n1 + sys.dofs.triangle_edges[t][1],
                                   n1 + sys.dofs.triangle_edges[t][2]};

        double a_loc[6][6] = {};
        double b_loc[3][12] = {};
        double m_loc[3][3] = {};
        for (size_t q = 0; q < rule.size(); ++q) {
            double w = rule.weights[q] * geom.det;
            Vec2 grad[6];
            for (int i = 0; i < 6; ++i) grad[i] = geom.physical_gradient(p2.at[q].gradients[i]);
            for (int i = 0; i < 6; ++i)
                for (int j = 0; j < 6; ++j) a_loc[i][j] += w * dot(grad[i], grad[j]);
            for (int i = 0; i < 3; ++i) {
                double qi = p1.at[q].values[i];
                for (int j = 0; j < 6; ++j) {
                    b_loc[i][2 * j] -= w * qi * grad[j].x;
                    b_loc[i][2 * j + 1] -= w * qi * grad[j].y;
                }
                for (int j = 0; j < 3; ++j) m_loc[i][j] += w * qi * p1.at[q].values[j];
            }
        }
        for (size_t q = 0; q < load_rule.size(); ++q) {
            double w = load_rule.weights[q] * geom.det;
            Vec2 x = geom.map(load_rule.points[q]);
            auto fv = load(x.x, x.y);
            for (int j = 0; j < 6; ++j) {
                double phi = p2_load.at[q].values[j];
                sys.f_vec[2 * vdof[j]] += w * fv[0] * phi;
                sys.f_vec[2 * vdof[j] + 1] += w * fv[1] * phi;
            }
        }

        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                if (a_loc[i][j] != 0.0) {
                    a_trip.add(2 * vdof[i], 2 * vdof[j], a_loc[i][j]);
                    a_trip.add(2 * vdof[i] + 1, 2 * vdof[j] + 1, a_loc[i][j]);
                }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 6; ++j)
                for (int c = 0; c < 2; ++c)
                    if (b_loc[i][2 * j + c] != 0.0)
                        b_trip.add(tri[i], 2 * vdof[j] + c, b_loc[i][2 * j + c]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m_trip.add(tri[i], tri[j], m_loc[i][j]);
    }

    sys.A = a_trip.compress();
    sys.B = b_trip.compress();
    sys.Mp = m_trip.compress();
    return sys;
}

SparseMatrix assemble_pressure_mass(const Mesh& mesh) {
    const int n1 = mesh.vertex_count();
    TripletBuilder m_trip(n1, n1);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        double area = mesh.triangle_area(t);
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                m_trip.add(tri[i], tri[j], area * (i == j ? 2.0 : 1.0) / 12.0);
    }
    return m_trip.compress();
}

DiscreteField interpolate_p1(const Mesh& mesh, const ScalarFunction& f) {
    DiscreteField field;
    field.space = FieldSpace::P1Scalar;
    field.mesh = &mesh;
    field.coeffs.resize(mesh.vertex_count());
    for (int v = 0; v < mesh.vertex_count(); ++v)
        field.coeffs[v] = f(mesh.vertices[v].x, mesh.vertices[v].y);
    return field;
}

DiscreteField interpolate_p2_vector(const Mesh& mesh, const P2DofMap& dofs,
                                    const VectorFunction& f) {
    DiscreteField field;
    field.space = FieldSpace::P2Vector;
    field.mesh = &mesh;
    field.coeffs.resize(2 * dofs.dof_count());
    for (int d = 0; d < dofs.dof_count(); ++d) {
        Vec2 p = d < dofs.n_vertices
                     ? mesh.vertices[d]
                     : 0.5 * (mesh.vertices[dofs.edge_vertices[d - dofs.n_vertices][0]] +
                              mesh.vertices[dofs.edge_vertices[d - dofs.n_vertices][1]]);
        auto v = f(p.x, p.y);
        field.coeffs[2 * d] = v[0];
        field.coeffs[2 * d + 1] = v[1];
    }
    return field;
}

namespace {

// Integrates kind-specific density over one triangle; the P2 dof map is only
// needed for vector fields.
double element_norm_contribution(const Mesh& mesh, const P2DofMap* dofs,
                                 const DiscreteField& field, NormKind kind, int t,
                                 const QuadratureRule& rule, const TabulatedBasis& tab) {
    ElementGeometry geom(mesh, t);
    const auto& tri = mesh.triangles[t];
    double acc = 0.0;
    const bool vec = field.space == FieldSpace::P2Vector;
    std::array<int, 6> vdof{};
    if (vec)
        vdof = {tri[0], tri[1], tri[2],
                dofs->n_vertices + dofs->triangle_edges[t][0],
                dofs->n_vertices + dofs->triangle_edges[t][1],
                dofs->n_vertices + dofs->triangle_edges[t][2]};

    for (size_t q = 0; q < rule.size(); ++q) {
        double w = rule.weights[q] * geom.det;
        double density = 0.0;
        if (vec) {
            double ux = 0.0, uy = 0.0;
            Vec2 gx{0.0, 0.0}, gy{0.0, 0.0};
            for (int j = 0; j < 6; ++j) {
                double phi = tab.at[q].values[j];
                Vec2 g = geom.physical_gradient(tab.at[q].gradients[j]);
                double cx = field.coeffs[2 * vdof[j]];
                double cy = field.coeffs[2 * vdof[j] + 1];
                ux += cx * phi;
                uy += cy * phi;
                gx = gx + cx * g;
                gy = gy + cy * g;
            }
            switch (kind) {
                case NormKind::L1: density = std::hypot(ux, uy); break;
                case NormKind::L2: density = ux * ux + uy * uy; break;
                case NormKind::H1Semi: density = dot(gx, gx) + dot(gy, gy); break;
            }
        } else {
            double val = 0.0;
            Vec2 g{0.0, 0.0};
            for (int j = 0; j < 3; ++j) {
                val += field.coeffs[tri[j]] * tab.at[q].values[j];
                g = g + field.coeffs[tri[j]] * geom.physical_gradient(tab.at[q].gradients[j]);
            }
            switch (kind) {
                case NormKind::L1: density = std::abs(val); break;
                case NormKind::L2: density = val * val; break;
                case NormKind::H1Semi: density = dot(g, g); break;
            }
        }
        acc += w * density;
    }
    return acc;
}

} // namespace

double field_norm(const DiscreteField& field, NormKind kind,
                  const std::optional<RegionMask>& mask) {
    const Mesh& mesh = *field.mesh;
    std::optional<P2DofMap> dofs;
    if (field.space == FieldSpace::P2Vector) dofs.emplace(mesh);
    if (dofs && static_cast<int>(field.coeffs.size()) != 2 * dofs->dof_count())
        throw invalid_parameter_error("field coefficient count does not match P2 vector space");
    if (!dofs && static_cast<int>(field.coeffs.size()) != mesh.vertex_count())
        throw invalid_parameter_error("field coefficient count does not match P1 space");

    const QuadratureRule rule = quadrature_rule(5);
    const TabulatedBasis tab(field.space == FieldSpace::P2Vector ? BasisFamily::P2 : BasisFamily::P1,
                             rule);
    double acc = 0.0;
    if (mask) {
        for (int t : mask->triangle_set)
            acc += element_norm_contribution(mesh, dofs ? &*dofs : nullptr, field, kind, t, rule, tab);
    } else {
        for (int t = 0; t < mesh.triangle_count(); ++t)
            acc += element_norm_contribution(mesh, dofs ? &*dofs : nullptr, field, kind, t, rule, tab);
    }
    return kind == NormKind::L1 ? acc : std::sqrt(acc);
}

DivergenceMetrics divergence_metrics(const Mesh& mesh, const DiscreteField& u,
                                     const RegionMask& mask) {
    if (u.space != FieldSpace::P2Vector)
        throw invalid_parameter_error("divergence metrics require a P2 vector field");
    P2DofMap dofs(mesh);
    if (static_cast<int>(u.coeffs.size()) != 2 * dofs.dof_count())
        throw invalid_parameter_error("field does not match mesh");

    std::vector<char> in_mask(mesh.triangle_count(), 0);
    for (int t : mask.triangle_set) in_mask.at(t) = 1;

    const QuadratureRule rule = quadrature_rule(4);
    const TabulatedBasis tab(BasisFamily::P2, rule);
    DivergenceMetrics out;
    double integral = 0.0, l2o = 0.0, l2m = 0.0, l2c = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        ElementGeometry geom(mesh, t);
        const auto& tri = mesh.triangles[t];
        std::array<int, 6> vdof = {tri[0], tri[1], tri[2],
                                   dofs.n_vertices + dofs.triangle_edges[t][0],
                                   dofs.n_vertices + dofs.triangle_edges[t][1],
                                   dofs.n_vertices + dofs.triangle_edges[t][2]};
        for (size_t q = 0; q < rule.size(); ++q) {
            double w = rule.weights[q] * geom.det;
            double div = 0.0;
            for (int j = 0; j < 6; ++j) {
                Vec2 g = geom.physical_gradient(tab.at[q].gradients[j]);
                div += u.coeffs[2 * vdof[j]] * g.x + u.coeffs[2 * vdof[j] + 1] * g.y;
            }
            integral += w * div;
            out.l1_omega += w * std::abs(div);
            l2o += w * div * div;
            (in_mask[t] ? l2m : l2c) += w * div * div;
        }
    }
    out.abs_integral = std::abs(integral);
    out.l2_omega = std::sqrt(l2o);
    out.l2_mask = std::sqrt(l2m);
    out.l2_complement = std::sqrt(l2c);
    return out;
}

FieldEvaluator::FieldEvaluator(const Mesh& mesh, const P2DofMap* dofs)
    : mesh_(&mesh), dofs_(dofs) {
    double xmax = -1e300, ymax = -1e300;
    xmin_ = 1e300;
    ymin_ = 1e300;
    for (const auto& v : mesh.vertices) {
        xmin_ = std::min(xmin_, v.x);
        ymin_ = std::min(ymin_, v.y);
        xmax = std::max(xmax, v.x);
        ymax = std::max(ymax, v.y);
    }
    int target = std::max(1, static_cast<int>(std::sqrt(mesh.triangle_count() / 2.0)));
    nx_ = ny_ = target;
    cell_ = std::max((xmax - xmin_) / nx_, (ymax - ymin_) / ny_) + 1e-300;
    buckets_.resize(static_cast<size_t>(nx_) * ny_);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        double tx0 = 1e300, ty0 = 1e300, tx1 = -1e300, ty1 = -1e300;
        for (int v : tri) {
            tx0 = std::min(tx0, mesh.vertices[v].x);
            ty0 = std::min(ty0, mesh.vertices[v].y);
            tx1 = std::max(tx1, mesh.vertices[v].x);
            ty1 = std::max(ty1, mesh.vertices[v].y);
        }
        int i0 = std::clamp(static_cast<int>((tx0 - xmin_) / cell_), 0, nx_ - 1);
        int i1 = std::clamp(static_cast<int>((tx1 - xmin_) / cell_), 0, nx_ - 1);
        int j0 = std::clamp(static_cast<int>((ty0 - ymin_) / cell_), 0, ny_ - 1);
        int j1 = std::clamp(static_cast<int>((ty1 - ymin_) / cell_), 0, ny_ - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i)
                buckets_[static_cast<size_t>(j) * nx_ + i].push_back(t);
    }
}

int FieldEvaluator::locate(Vec2 p) const {
    int i = std::clamp(static_cast<int>((p.x - xmin_) / cell_), 0, nx_ - 1);
    int j = std::clamp(static_cast<int>((p.y - ymin_) / cell_), 0, ny_ - 1);
    const double tol = 1e-10;
    for (int t : buckets_[static_cast<size_t>(j) * nx_ + i]) {
        const auto& tri = mesh_->triangles[t];
        Vec2 a = mesh_->vertices[tri[0]], b = mesh_->vertices[tri[1]], c = mesh_->vertices[tri[2]];
        double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        double l2 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
        double l3 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
        if (l2 >= -tol && l3 >= -tol && l2 + l3 <= 1.0 + tol) return t;
    }
    return -1;
}

std::array<double, 2> FieldEvaluator::velocity(const DiscreteField& u, Vec2 p) const {
    int t = locate(p);
    if (t < 0) throw out_of_domain_error("evaluation point outside mesh");
    const auto& tri = mesh_->triangles[t];
    Vec2 a = mesh_->vertices[tri[0]], b = mesh_->vertices[tri[1]], c = mesh_->vertices[tri[2]];
    double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    double l2 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
    double l3 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
    l2 = std::max(l2, 0.0);
    l3 = std::max(l3, 0.0);
    if (l2 + l3 > 1.0) {
        double s = 1.0 / (l2 + l3);
        l2 *= s;
        l3 *= s;
    }
    auto basis = eval_basis(BasisFamily::P2, {l2, l3});
    std::array<int, 6> vdof = {tri[0], tri[1], tri[2],
                               dofs_->n_vertices + dofs_->triangle_edges[t][0],
                               dofs_->n_vertices + dofs_->triangle_edges[t][1],
                               dofs_->n_vertices + dofs_->triangle_edges[t][2]};
    std::array<double, 2> val = {0.0, 0.0};
    for (int j = 0; j < 6; ++j) {
        val[0] += u.coeffs[2 * vdof[j]] * basis.values[j];
        val[1] += u.coeffs[2 * vdof[j] + 1] * basis.values[j];
    }
    return val;
}

double FieldEvaluator::pressure(const DiscreteField& q, Vec2 p) const {
    int t = locate(p);
    if (t < 0) throw out_of_domain_error("evaluation point outside mesh");
    const auto& tri = mesh_->triangles[t];
    Vec2 a = mesh_->vertices[tri[0]], b = mesh_->vertices[tri[1]], c = mesh_->vertices[tri[2]];
    double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    double l2 = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
    double l3 = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
    return q.coeffs[tri[0]] * (1.0 - l2 - l3) + q.coeffs[tri[1]] * l2 + q.coeffs[tri[2]] * l3;
}

namespace {

template <typename Density>
double integrate_over_mesh(const Mesh& mesh, BasisFamily family, const Density& density) {
    const QuadratureRule rule = quadrature_rule(6);
    const TabulatedBasis tab(family, rule);
    double acc = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        ElementGeometry geom(mesh, t);
        for (size_t q = 0; q < rule.size(); ++q) {
            Vec2 x = geom.map(rule.points[q]);
            acc += rule.weights[q] * geom.det * density(t, q, x, geom, tab);
        }
    }
    return acc;
}

} // namespace

double velocity_error_l2(const DiscreteField& u, const VectorFunction& exact) {
    const Mesh& mesh = *u.mesh;
    P2DofMap dofs(mesh);
    double acc = integrate_over_mesh(
        mesh, BasisFamily::P2,
        [&](int t, size_t q, Vec2 x, const ElementGeometry&, const TabulatedBasis& tab) {
            const auto& tri = mesh.triangles[t];
            std::array<int, 6> vdof = {tri[0], tri[1], tri[2],
                                       dofs.n_vertices + dofs.triangle_edges[t][0],
                                       dofs.n_vertices + dofs.triangle_edges[t][1],
                                       dofs.n_vertices + dofs.triangle_edges[t][2]};
            double ux = 0.0, uy = 0.0;
            for (int j = 0; j < 6; ++j) {
                ux += u.coeffs[2 * vdof[j]] * tab.at[q].values[j];
                uy += u.coeffs[2 * vdof[j] + 1] * tab.at[q].values[j];
            }
            auto ex = exact(x.x, x.y);
            return (ux - ex[0]) * (ux - ex[0]) + (uy - ex[1]) * (uy - ex[1]);
        });
    return std::sqrt(acc);
}

double velocity_error_h1semi(const DiscreteField& u, const VectorFunction& exact_grad_u1,
                             const VectorFunction& exact_grad_u2) {
    const Mesh& mesh = *u.mesh;
    P2DofMap dofs(mesh);
    double acc = integrate_over_mesh(
        mesh, BasisFamily::P2,
        [&](int t, size_t q, Vec2 x, const ElementGeometry& geom, const TabulatedBasis& tab) {
            const auto& tri = mesh.triangles[t];
            std::array<int, 6> vdof = {tri[0], tri[1], tri[2],
                                       dofs.n_vertices + dofs.triangle_edges[t][0],
                                       dofs.n_vertices + dofs.triangle_edges[t][1],
                                       dofs.n_vertices + dofs.triangle_edges[t][2]};
            Vec2 gx{0.0, 0.0}, gy{0.0, 0.0};
            for (int j = 0; j < 6; ++j) {
                Vec2 g = geom.physical_gradient(tab.at[q].gradients[j]);
                gx = gx + u.coeffs[2 * vdof[j]] * g;
                gy = gy + u.coeffs[2 * vdof[j] + 1] * g;
            }
            auto e1 = exact_grad_u1(x.x, x.y);
            auto e2 = exact_grad_u2(x.x, x.y);
            double d1x = gx.x - e1[0], d1y = gx.y - e1[1];
            double d2x = gy.x - e2[0], d2y = gy.y - e2[1];
            return d1x * d1x + d1y * d1y + d2x * d2x + d2y * d2y;
        });
    return std::sqrt(acc);
}

double pressure_error_l2(const DiscreteField& p, const ScalarFunction& exact) {
    const Mesh& mesh = *p.mesh;
    double acc = integrate_over_mesh(
        mesh, BasisFamily::P1,
        [&](int t, size_t q, Vec2 x, const ElementGeometry&, const TabulatedBasis& tab) {
            const auto& tri = mesh.triangles[t];
            double v = 0.0;
            for (int j = 0; j < 3; ++j) v += p.coeffs[tri[j]] * tab.at[q].values[j];
            double d = v - exact(x.x, x.y);
            return d * d;
        });
    return std::sqrt(acc);
}

void write_field_csv(const DiscreteField& field, const P2DofMap* dofs, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);
    f.precision(17);
    const Mesh& mesh = *field.mesh;
    if (field.space == FieldSpace::P1Scalar) {
        f << "x,y,value\n";
        for (int v = 0; v < mesh.vertex_count(); ++v)
            f << mesh.vertices[v].x << "," << mesh.vertices[v].y << "," << field.coeffs[v] << "\n";
        return;
    }
    f << "x,y,ux,uy\n";
    for (int d = 0; d < dofs->dof_count(); ++d) {
        Vec2 p = d < dofs->n_vertices
                     ? mesh.vertices[d]
                     : 0.5 * (mesh.vertices[dofs->edge_vertices[d - dofs->n_vertices][0]] +
                              mesh.vertices[dofs->edge_vertices[d - dofs->n_vertices][1]]);
        f << p.x << "," << p.y << "," << field.coeffs[2 * d] << "," << field.coeffs[2 * d + 1]
          << "\n";
    }
}

} // namespace stokesband
