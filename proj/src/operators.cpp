#include "stokesband/operators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "stokesband/errors.hpp"

namespace stokesband {

void write_estimates_csv(const std::vector<ConstantEstimate>& estimates, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw io_error("cannot open for writing: " + path);
    f.precision(17);
    f << "h,delta_volume,diameter,function_id,value\n";
    for (const auto& e : estimates)
        f << e.h << "," << e.delta_volume << "," << e.diameter_spec << "," << e.function_id << ","
          << e.value << "\n";
}

DiscreteField apply_P(const DiscreteField& p, const RegionMask& mask) {
    if (p.space != FieldSpace::P1Scalar)
        throw invalid_parameter_error("apply_P expects a P1 scalar field");
    DiscreteField out = p;
    for (int v : mask.constrained_vertices) out.coeffs.at(v) = 0.0;
    return out;
}

DiscreteField apply_T(const DiscreteField& p, const SparseMatrix& Mp) {
    if (p.space != FieldSpace::P1Scalar)
        throw invalid_parameter_error("apply_T expects a P1 scalar field");
    auto Mq = Mp.multiply(p.coeffs);
    double integral = 0.0, volume = 0.0;
    for (double v : Mq) integral += v;
    for (double v : Mp.values()) volume += v;
    double mean = integral / volume;
    DiscreteField out = p;
    for (double& c : out.coeffs) c -= mean;
    return out;
}

namespace {

// Exact P1 moments over one triangle: integral of q and of q^2.
struct ElementMoments {
    double int_q = 0.0;
    double int_q2 = 0.0;
    double int_fg = 0.0;
};

ElementMoments p1_moments(const Mesh& mesh, const std::vector<double>& f,
                          const std::vector<double>& g, int t) {
    const auto& tri = mesh.triangles[t];
    double area = mesh.triangle_area(t);
    double f1 = f[tri[0]], f2 = f[tri[1]], f3 = f[tri[2]];
    double g1 = g[tri[0]], g2 = g[tri[1]], g3 = g[tri[2]];
    ElementMoments m;
    m.int_q = area * (f1 + f2 + f3) / 3.0;
    m.int_q2 = area * (f1 * f1 + f2 * f2 + f3 * f3 + f1 * f2 + f2 * f3 + f3 * f1) / 6.0;
    m.int_fg = area *
               (2.0 * (f1 * g1 + f2 * g2 + f3 * g3) + f1 * g2 + f2 * g1 + f2 * g3 + f3 * g2 +
                f1 * g3 + f3 * g1) /
               12.0;
    return m;
}

} // namespace

double masked_l2_inner(const DiscreteField& f, const DiscreteField& g, const RegionMask& mask) {
    const Mesh& mesh = *f.mesh;
    std::vector<char> masked(mesh.triangle_count(), 0);
    for (int t : mask.triangle_set) masked.at(t) = 1;
    double acc = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t)
        if (!masked[t]) acc += p1_moments(mesh, f.coeffs, g.coeffs, t).int_fg;
    return acc;
}

ConstantEstimate c_delta_ratio(const DiscreteField& p, const RegionMask& mask) {
    const Mesh& mesh = *p.mesh;
    std::vector<char> masked(mesh.triangle_count(), 0);
    for (int t : mask.triangle_set) masked.at(t) = 1;

    // integrals of p and p^2 over the unmasked triangles, element-exact
    double i1 = 0.0, i2 = 0.0, volume = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        volume += mesh.triangle_area(t);
        if (masked[t]) continue;
        auto m = p1_moments(mesh, p.coeffs, p.coeffs, t);
        i1 += m.int_q;
        i2 += m.int_q2;
    }
    if (i2 <= 0.0) throw degenerate_input_error("field vanishes outside the mask");

    // ||T(Pp)||^2 = ||Pp||^2 - |Omega| mean^2 = i2 - i1^2 / |Omega|
    double num = i2 * volume - i1 * i1;
    double ratio = std::sqrt(std::max(num, 0.0) / (volume * i2));

    ConstantEstimate est;
    est.value = ratio;
    est.kind = EstimateKind::CDeltaRatio;
    est.h = mesh.h;
    est.delta_volume = mask.volume;
    est.diameter_spec = mask.diameter_spec;
    return est;
}

RieszSolver::RieszSolver(const VelocitySystem& vs) : vs_(&vs), fact_(vs.A_ff) {}

double RieszSolver::grad_hminus1_norm(const DiscreteField& p) const {
    auto rhs = vs_->B_f.multiply_transpose(p.coeffs);
    auto w = fact_.solve(rhs);
    auto Aw = vs_->A_ff.multiply(w);
    return std::sqrt(std::max(vec_dot(w, Aw), 0.0));
}

double grad_hminus1_norm(const VelocitySystem& vs, const DiscreteField& p) {
    return RieszSolver(vs).grad_hminus1_norm(p);
}

double necas_quotient(const RieszSolver& riesz, const SparseMatrix& Mp, const DiscreteField& p) {
    auto Mq = Mp.multiply(p.coeffs);
    double l2 = std::sqrt(std::max(vec_dot(p.coeffs, Mq), 0.0));
    double hm1 = riesz.grad_hminus1_norm(p);
    if (hm1 <= 0.0) throw degenerate_input_error("grad p has zero H^-1 norm");
    return l2 / hm1;
}

ConstantEstimate discrete_infsup(const StokesSystem& sys, const PressureConstraint& constraint) {
    const Mesh& mesh = *sys.mesh;
    VelocitySystem vs = apply_velocity_dirichlet(sys, [](double, double) {
        return std::array<double, 2>{0.0, 0.0};
    });
    Factorization fact(vs.A_ff);

    // free pressure dofs per constraint
    const int np = sys.n_pressure_dofs();
    std::vector<char> fixed(np, 0);
    ConstantEstimate est;
    est.kind = EstimateKind::InfSupBeta;
    est.h = mesh.h;
    if (const auto* band = std::get_if<BandZero>(&constraint)) {
        if (band->mask.empty()) throw empty_selection_error("BandZero mask is empty");
        for (int v : band->mask.constrained_vertices) fixed.at(v) = 1;
        est.delta_volume = band->mask.volume;
        est.diameter_spec = band->mask.diameter_spec;
    } else if (std::get_if<BoundaryZero>(&constraint)) {
        for (int v : mesh.boundary_vertices) fixed[v] = 1;
    } else if (const auto* pz = std::get_if<PointZero>(&constraint)) {
        fixed.at(pz->vertex) = 1;
    }
    std::vector<int> free_p;
    for (int v = 0; v < np; ++v)
        if (!fixed[v]) free_p.push_back(v);
    if (free_p.empty()) throw over_constrained_error("no free pressure dofs left");
    const int npc = static_cast<int>(free_p.size());

    // restrict B (rows) and Mp (rows+cols) to the free pressure dofs
    std::vector<int> free_idx(np, -1);
    for (int i = 0; i < npc; ++i) free_idx[free_p[i]] = i;
    TripletBuilder b_trip(npc, vs.B_f.cols());
    {
        auto rp = vs.B_f.row_offsets();
        auto ci = vs.B_f.col_indices();
        auto vb = vs.B_f.values();
        for (int i = 0; i < np; ++i) {
            if (free_idx[i] < 0) continue;
            for (int k = rp[i]; k < rp[i + 1]; ++k) b_trip.add(free_idx[i], ci[k], vb[k]);
        }
    }
    SparseMatrix B_c = b_trip.compress();
    TripletBuilder m_trip(npc, npc);
    {
        auto rp = sys.Mp.row_offsets();
        auto ci = sys.Mp.col_indices();
        auto vm = sys.Mp.values();
        for (int i = 0; i < np; ++i) {
            if (free_idx[i] < 0) continue;
            for (int k = rp[i]; k < rp[i + 1]; ++k)
                if (free_idx[ci[k]] >= 0) m_trip.add(free_idx[i], free_idx[ci[k]], vm[k]);
        }
    }
    SparseMatrix M_c = m_trip.compress();

    LinearOperator schur = [&](std::span<const double> q) {
        auto bt = B_c.multiply_transpose(q);
        auto w = fact.solve(bt);
        return B_c.multiply(w);
    };

    std::vector<std::vector<double>> deflate;
    if (std::holds_alternative<ZeroMean>(constraint))
        deflate.push_back(std::vector<double>(npc, 1.0));

    auto pair = smallest_generalized_eigenpair(schur, M_c, 0.0, deflate);
    est.value = std::sqrt(std::max(pair.value, 0.0));
    return est;
}

// ---- analytic path --------------------------------------------------------

namespace {

// Composite Gauss-Legendre (8 panels x 16 nodes) in radius crossed with a
// periodic trapezoid rule in angle. Integrands are smooth, so this reaches
// near machine precision on the unit disk.
struct PolarQuadrature {
    std::vector<double> r, wr;
    int n_theta;

    PolarQuadrature(double r0, double r1, int panels = 8, int n_angular = 512)
        : n_theta(n_angular) {
        static const double gl_x[8] = {0.0950125098376374, 0.2816035507792589,
                                       0.4580167776572274, 0.6178762444026438,
                                       0.7554044083550030, 0.8656312023878318,
                                       0.9445750230732326, 0.9894009349916499};
        static const double gl_w[8] = {0.1894506104550685, 0.1826034150449236,
                                       0.1691565193950025, 0.1495959888165767,
                                       0.1246289712555339, 0.0951585116824928,
                                       0.0622535239386479, 0.0271524594117541};
        for (int p = 0; p < panels; ++p) {
            double a = r0 + (r1 - r0) * p / panels;
            double b = r0 + (r1 - r0) * (p + 1) / panels;
            double mid = 0.5 * (a + b), half = 0.5 * (b - a);
            for (int i = 0; i < 8; ++i) {
                r.push_back(mid - half * gl_x[i]);
                wr.push_back(half * gl_w[i]);
                r.push_back(mid + half * gl_x[i]);
                wr.push_back(half * gl_w[i]);
            }
        }
    }

    // integral of f over the annulus r0 <= |x| <= r1
    double integrate(const ScalarFunction& f) const {
        double acc = 0.0;
        double dth = 2.0 * M_PI / n_theta;
        for (size_t i = 0; i < r.size(); ++i) {
            double ring = 0.0;
            for (int j = 0; j < n_theta; ++j) {
                double th = dth * j;
                ring += f(r[i] * std::cos(th), r[i] * std::sin(th));
            }
            acc += wr[i] * r[i] * ring * dth;
        }
        return acc;
    }
};

} // namespace

AnalyticRatioResult analytic_cdelta_ratio(const ScalarFunction& f, AnalyticRegion region,
                                          double param, bool constant_function,
                                          bool subtract_mean_first) {
    if (param <= 0.0) throw invalid_parameter_error("analytic region parameter must be > 0");
    const double omega = M_PI;

    double r_in = 0.0, r_out = 1.0, delta_volume = 0.0;
    if (region == AnalyticRegion::CenterDisk) {
        if (param >= 1.0) throw invalid_parameter_error("Delta disk radius must be < 1");
        r_in = param;
        delta_volume = M_PI * param * param;
    } else {
        if (param >= 1.0) throw invalid_parameter_error("Delta ring width must be < 1");
        r_out = 1.0 - param;
        delta_volume = M_PI * (1.0 - r_out * r_out);
    }

    AnalyticRatioResult out;
    out.delta_volume = delta_volume;
    if (constant_function) {
        // the Remark's closed form; quadrature of a constant adds nothing
        out.ratio = std::sqrt(delta_volume / omega);
        return out;
    }

    ScalarFunction g = f;
    if (subtract_mean_first) {
        PolarQuadrature full(0.0, 1.0);
        double mean = full.integrate(f) / omega;
        g = [f, mean](double x, double y) { return f(x, y) - mean; };
    }

    PolarQuadrature quad(region == AnalyticRegion::CenterDisk ? r_in : 0.0, r_out);
    double i1 = quad.integrate(g);
    double i2 = quad.integrate([&g](double x, double y) {
        double v = g(x, y);
        return v * v;
    });
    if (i2 <= 0.0) throw degenerate_input_error("function vanishes outside Delta");
    double num = i2 * omega - i1 * i1;
    out.ratio = std::sqrt(std::max(num, 0.0) / (omega * i2));
    return out;
}

} // namespace stokesband
