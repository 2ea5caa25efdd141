#include "nlfp/kernels.hpp"

#include <cmath>

namespace nlfp {

LiftedFrame lifted_fields(const Vec3& v, const Vec3& v_star)
{
    const Vec3 z = v - v_star;
    LiftedFrame f;
    for (int j = 0; j < 3; ++j) {
        Eigen::VectorXd bt = Eigen::VectorXd::Zero(12);
        const Vec3 bj = b_field(j, z);
        bt.segment<3>(3) = bj;
        bt.segment<3>(9) = -bj;
        f.b_tilde[j] = bt;
    }
    f.n_hat = Eigen::VectorXd::Zero(12);
    f.n_hat.segment<3>(3) = z;
    f.n_hat.segment<3>(9) = -z;
    f.r = z.norm();
    return f;
}

VectorField fuzzy_b_tilde(int j)
{
    if (j < 0 || j > 2) throw InvalidArgument("fuzzy_b_tilde: j must be 0, 1 or 2");
    return [j](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        if (p.size() != 12) throw InvalidArgument("fuzzy_b_tilde: point must be in R^12");
        return lifted_fields(p.segment<3>(3), p.segment<3>(9)).b_tilde[j];
    };
}

Eigen::VectorXd fuzzy_frame(char kind, int i)
{
    if (i < 0 || i > 2) throw InvalidArgument("fuzzy_frame: i must be 0, 1 or 2");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(12);
    const double s = 1.0 / std::sqrt(2.0);
    switch (kind) {
    case '~':
        e[3 + i] = s;
        e[9 + i] = s;
        break;
    case '^':
        e[3 + i] = s;
        e[9 + i] = -s;
        break;
    case 'x': e[i] = 1.0; break;
    case 'e': e[6 + i] = 1.0; break;
    default: throw InvalidArgument("fuzzy_frame: unknown kind");
    }
    return e;
}

VectorField multispecies_b(int i, int j, int k, const std::vector<double>& masses)
{
    const int ns = static_cast<int>(masses.size());
    if (i < 0 || i >= ns || j < 0 || j >= ns || k < 0 || k > 2) throw InvalidArgument("multispecies_b: index out of range");
    const double mi = masses[i];
    const double mj = masses[j];
    if (!(mi > 0 && mj > 0)) throw InvalidArgument("multispecies_b: masses must be positive");
    return [=](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        if (p.size() != 6 * ns) throw InvalidArgument("multispecies_b: point must be in R^{6 N_s}");
        const Vec3 z = p.segment<3>(3 * i) - p.segment<3>(3 * (ns + j));
        const Vec3 bk = b_field(k, z);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(6 * ns);
        out.segment<3>(3 * i) = bk / mi;
        out.segment<3>(3 * (ns + j)) = -bk / mj;
        return out;
    };
}

Eigen::VectorXd multispecies_n(const Eigen::VectorXd& p, int i, int j, int ns)
{
    if (p.size() != 6 * ns || i < 0 || i >= ns || j < 0 || j >= ns) throw InvalidArgument("multispecies_n: bad arguments");
    const Vec3 z = p.segment<3>(3 * i) - p.segment<3>(3 * (ns + j));
    Eigen::VectorXd out = Eigen::VectorXd::Zero(6 * ns);
    out.segment<3>(3 * i) = z;
    out.segment<3>(3 * (ns + j)) = -z;
    return out;
}

Eigen::VectorXd multispecies_e(int l, int q, int ns)
{
    if (l < 0 || l >= ns || q < 0 || q > 2) throw InvalidArgument("multispecies_e: index out of range");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(6 * ns);
    e[3 * l + q] = 1.0;
    return e;
}

Eigen::VectorXd multispecies_xi(int l, int q, int ns)
{
    if (l < 0 || l >= ns || q < 0 || q > 2) throw InvalidArgument("multispecies_xi: index out of range");
    Eigen::VectorXd e = Eigen::VectorXd::Zero(6 * ns);
    e[3 * (ns + l) + q] = 1.0;
    return e;
}

VectorField constant_field(const Eigen::VectorXd& c)
{
    return [c](const Eigen::VectorXd&) { return c; };
}

Eigen::VectorXd lie_bracket(const VectorField& a, const VectorField& b, const Eigen::VectorXd& p, double h)
{
    if (!(h > 0)) throw InvalidArgument("lie_bracket: h must be positive");
    const Eigen::VectorXd ap = a(p);
    const Eigen::VectorXd bp = b(p);
    auto check = [](const Eigen::VectorXd& v) {
        if (!v.allFinite()) throw NumericalError("lie_bracket: non-finite field value in stencil");
        return v;
    };
    check(ap);
    check(bp);
    const Eigen::VectorXd db_a = (check(b(p + h * ap)) - check(b(p - h * ap))) / (2.0 * h);
    const Eigen::VectorXd da_b = (check(a(p + h * bp)) - check(a(p - h * bp))) / (2.0 * h);
    return db_a - da_b;
}

}  // namespace nlfp
