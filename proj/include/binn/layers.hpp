#pragma once

#include "binn/common.hpp"
#include "binn/coupling.hpp"
#include "binn/pwl.hpp"

#include <json.hpp>

#include <limits>
#include <string>
#include <variant>
#include <vector>

namespace binn {

using json = nlohmann::json;

inline constexpr double kNoBound = std::numeric_limits<double>::infinity();

namespace detail {

// For I + H with H^2 = 0 the inverse is I - H = 2I - J.
inline Mat unipotent_inverse(const Mat& J) { return 2.0 * Mat::Identity(J.rows(), J.cols()) - J; }

inline std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vec from_std(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

// y_last = x_last + sum_{j<sources} n^-(j+1) relu(x_j)
struct ShiftLast {
    int n = 2;
    int dim = 2;
    int sources = 1;
    bool lifted = false;

    int in_dim() const { return dim; }
    int out_dim() const { return dim; }

    double increment(const Vec& x) const {
        double s = 0.0, w = 1.0;
        for (int j = 0; j < sources; ++j) {
            w /= n;
            s += w * relu(x(j));
        }
        return s;
    }

    Vec forward(const Vec& x) const {
        require_dim(x, dim, "ShiftLast");
        Vec y = x;
        y(dim - 1) += increment(x);
        return y;
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, dim, "ShiftLast");
        Vec x = y;
        x(dim - 1) -= increment(y);
        return x;
    }
    Mat jacobian(const Vec& x) const {
        require_dim(x, dim, "ShiftLast");
        Mat J = Mat::Identity(dim, dim);
        double w = 1.0;
        for (int j = 0; j < sources; ++j) {
            w /= n;
            J(dim - 1, j) = w * relu_d(x(j));
        }
        return J;
    }
    Mat inverse_jacobian(const Vec& y) const { return detail::unipotent_inverse(jacobian(inverse(y))); }

    // Single field with horizon 1; equals the composition of the per-source flows.
    Vec field(const Vec& x) const {
        Vec f = Vec::Zero(dim);
        double w = 1.0;
        for (int j = 0; j < sources; ++j) {
            w /= n;
            f(dim - 1) += w * relu(x(j));
        }
        return f;
    }

    double bound() const { return n / (n - 1.0); }
    double inverse_bound() const { return bound(); }
};

// y_i = x_i + g(x_gate) disp_i for i < k, g(t) = 2 l0(2 scale (t - c) + 1).
struct LocalizedTranslate {
    int dim = 2;
    int gate = 1;
    double center = 0.0;
    double scale = 1.0;
    Vec disp;
    bool lifted = false;

    int in_dim() const { return dim; }
    int out_dim() const { return dim; }

    double arg(double t) const { return 2.0 * scale * (t - center) + 1.0; }
    double g(double t) const { return 2.0 * hat(arg(t)); }
    double g_d(double t) const { return 4.0 * scale * hat_d(arg(t)); }

    Vec forward(const Vec& x) const {
        require_dim(x, dim, "LocalizedTranslate");
        Vec y = x;
        y.head(disp.size()) += g(x(gate)) * disp;
        return y;
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, dim, "LocalizedTranslate");
        Vec x = y;
        x.head(disp.size()) -= g(y(gate)) * disp;
        return x;
    }
    Mat jacobian(const Vec& x) const {
        require_dim(x, dim, "LocalizedTranslate");
        Mat J = Mat::Identity(dim, dim);
        J.col(gate).head(disp.size()) += g_d(x(gate)) * disp;
        return J;
    }
    Mat inverse_jacobian(const Vec& y) const { return detail::unipotent_inverse(jacobian(inverse(y))); }

    Vec field(const Vec& x) const {
        Vec f = Vec::Zero(dim);
        f.head(disp.size()) = 2.0 * hat_relu(arg(x(gate))) * disp;
        return f;
    }

    double bound() const { return 1.0 + 6.0 * scale * disp.norm(); }
    double inverse_bound() const { return bound(); }
};

// y_target = x_target + 2 shift l0((x_anchor - c)/delta + 1); eps is the stage tolerance.
struct LocalizedShift {
    int dim = 2;
    int target = 0;
    int anchor = 1;
    double center = 0.0;
    double delta = 1.0;
    double shift = 0.0;
    double eps = 0.0;

    int in_dim() const { return dim; }
    int out_dim() const { return dim; }

    double arg(double t) const { return (t - center) / delta + 1.0; }

    Vec forward(const Vec& x) const {
        require_dim(x, dim, "LocalizedShift");
        Vec y = x;
        y(target) += 2.0 * shift * hat(arg(x(anchor)));
        return y;
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, dim, "LocalizedShift");
        Vec x = y;
        x(target) -= 2.0 * shift * hat(arg(y(anchor)));
        return x;
    }
    Mat jacobian(const Vec& x) const {
        require_dim(x, dim, "LocalizedShift");
        Mat J = Mat::Identity(dim, dim);
        J(target, anchor) += 2.0 * shift * hat_d(arg(x(anchor))) / delta;
        return J;
    }
    Mat inverse_jacobian(const Vec& y) const { return detail::unipotent_inverse(jacobian(inverse(y))); }

    Vec field(const Vec& x) const {
        Vec f = Vec::Zero(dim);
        f(target) = 2.0 * shift * hat_relu(arg(x(anchor)));
        return f;
    }

    double bound() const { return 1.0 + eps / delta; }
    double inverse_bound() const { return bound(); }
};

// y_last = z_last + 2 l0(2 (z_gate - c)/delta + 1) disp
struct LocalizedLast {
    int dim = 2;
    int gate = 0;
    double center = 0.0;
    double delta = 1.0;
    double disp = 0.0;

    int in_dim() const { return dim; }
    int out_dim() const { return dim; }

    double arg(double t) const { return 2.0 * (t - center) / delta + 1.0; }

    Vec forward(const Vec& z) const {
        require_dim(z, dim, "LocalizedLast");
        Vec y = z;
        y(dim - 1) += 2.0 * hat(arg(z(gate))) * disp;
        return y;
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, dim, "LocalizedLast");
        Vec z = y;
        z(dim - 1) -= 2.0 * hat(arg(y(gate))) * disp;
        return z;
    }
    Mat jacobian(const Vec& z) const {
        require_dim(z, dim, "LocalizedLast");
        Mat J = Mat::Identity(dim, dim);
        J(dim - 1, gate) += 4.0 * hat_d(arg(z(gate))) * disp / delta;
        return J;
    }
    Mat inverse_jacobian(const Vec& y) const { return detail::unipotent_inverse(jacobian(inverse(y))); }

    Vec field(const Vec& z) const {
        Vec f = Vec::Zero(dim);
        f(dim - 1) = 2.0 * hat_relu(arg(z(gate))) * disp;
        return f;
    }

    double bound() const { return 1.0 + 6.0 * std::abs(disp) / delta; }
    double inverse_bound() const { return bound(); }
};

// H^r applied to every coordinate.
struct PerCoordinatePWL {
    PwlNet net;
    int dim = 2;

    int in_dim() const { return dim; }
    int out_dim() const { return dim; }

    Vec forward(const Vec& x) const {
        require_dim(x, dim, "PerCoordinatePWL");
        return x.unaryExpr([this](double t) { return net.eval(t); });
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, dim, "PerCoordinatePWL");
        return y.unaryExpr([this](double t) { return net.inverse(t); });
    }
    Mat jacobian(const Vec& x) const {
        require_dim(x, dim, "PerCoordinatePWL");
        return x.unaryExpr([this](double t) { return net.derivative(t); }).asDiagonal();
    }
    Mat inverse_jacobian(const Vec& y) const {
        require_dim(y, dim, "PerCoordinatePWL");
        return y.unaryExpr([this](double t) { return net.inverse_derivative(t); }).asDiagonal();
    }

    double bound() const { return net.max_slope(); }
    double inverse_bound() const { return net.max_slope(); }
};

struct AffineCoupling {
    AffineCouplingBlock block;

    int in_dim() const { return block.dim(); }
    int out_dim() const { return block.dim(); }

    Vec forward(const Vec& x) const {
        require_dim(x, block.dim(), "AffineCoupling");
        return block.forward(x);
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, block.dim(), "AffineCoupling");
        return block.inverse(y);
    }
    Mat jacobian(const Vec& x) const { return block.jacobian(x); }
    Mat inverse_jacobian(const Vec& y) const { return block.inverse_jacobian(y); }

    double bound() const { return kNoBound; }
    double inverse_bound() const { return kNoBound; }
};

// x -> (x, 0_{d+1}, x_d)
struct Lift {
    int d = 2;

    int in_dim() const { return d; }
    int out_dim() const { return 2 * d + 2; }

    Vec forward(const Vec& x) const {
        require_dim(x, d, "Lift");
        Vec z = Vec::Zero(2 * d + 2);
        z.head(d) = x;
        z(2 * d + 1) = x(d - 1);
        return z;
    }
    Vec inverse(const Vec& z) const {
        require_dim(z, 2 * d + 2, "Lift");
        return z.head(d);
    }
    Mat jacobian(const Vec&) const {
        Mat J = Mat::Zero(2 * d + 2, d);
        J.topRows(d).setIdentity();
        J(2 * d + 1, d - 1) = 1.0;
        return J;
    }
    Mat inverse_jacobian(const Vec&) const {
        Mat J = Mat::Zero(d, 2 * d + 2);
        J.leftCols(d).setIdentity();
        return J;
    }

    double bound() const { return 2.0; }
    double inverse_bound() const { return 1.0; }
};

// (y, 0, y, 0) -> y; rejects states off that subspace.
struct Project {
    int d = 2;
    double tol = 1e-9;

    int in_dim() const { return 2 * d + 2; }
    int out_dim() const { return d; }

    double off_manifold(const Vec& z) const {
        double e = std::max(std::abs(z(d)), std::abs(z(2 * d + 1)));
        for (int j = 0; j < d; ++j) e = std::max(e, std::abs(z(d + 1 + j) - z(j)));
        return e;
    }

    Vec forward(const Vec& z) const {
        require_dim(z, 2 * d + 2, "Project");
        double e = off_manifold(z);
        if (!(e <= tol)) throw Error("Project: input off the projection domain by " + std::to_string(e));
        return z.head(d);
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, d, "Project");
        Vec z = Vec::Zero(2 * d + 2);
        z.head(d) = y;
        z.segment(d + 1, d) = y;
        return z;
    }
    Mat jacobian(const Vec&) const {
        Mat J = Mat::Zero(d, 2 * d + 2);
        J.leftCols(d).setIdentity();
        return J;
    }
    Mat inverse_jacobian(const Vec&) const {
        Mat J = Mat::Zero(2 * d + 2, d);
        J.topRows(d).setIdentity();
        J.block(d + 1, 0, d, d).setIdentity();
        return J;
    }

    double bound() const { return 1.0; }
    double inverse_bound() const { return 2.0; }
};

// z_{d+1+j} += z_j for j < d
struct CopyBlock {
    int d = 2;

    int in_dim() const { return 2 * d + 2; }
    int out_dim() const { return 2 * d + 2; }

    Vec forward(const Vec& z) const {
        require_dim(z, 2 * d + 2, "CopyBlock");
        Vec y = z;
        y.segment(d + 1, d) += z.head(d);
        return y;
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, 2 * d + 2, "CopyBlock");
        Vec z = y;
        z.segment(d + 1, d) -= y.head(d);
        return z;
    }
    Mat jacobian(const Vec&) const {
        Mat J = Mat::Identity(2 * d + 2, 2 * d + 2);
        J.block(d + 1, 0, d, d) += Mat::Identity(d, d);
        return J;
    }
    Mat inverse_jacobian(const Vec& y) const { return detail::unipotent_inverse(jacobian(y)); }

    Vec field(const Vec& z) const {
        Vec f = Vec::Zero(2 * d + 2);
        f.segment(d + 1, d) = z.head(d);
        return f;
    }

    double bound() const { return 1.0 + std::sqrt(static_cast<double>(d)); }
    double inverse_bound() const { return bound(); }
};

// y_last = z_last - 2 t h(z); h is the gated sum over both duplicated blocks.
struct KillLast {
    int d = 2;
    Vec center;  // length 2d+2
    double delta = 1.0;
    double anchor = 0.0;
    double stated_bound = 1.0;

    int in_dim() const { return 2 * d + 2; }
    int out_dim() const { return 2 * d + 2; }

    double a1(const Vec& z, int j) const { return 2.0 * (z(j) - center(j)) / delta + 1.0; }

    double pre(const Vec& z) const {
        double s = -0.5 * (d - 1);
        for (int j = 0; j < d; ++j) s += hat_l1(a1(z, j)) + hat_l2(a1(z, j + d + 1));
        return s;
    }
    double h(const Vec& z) const { return relu(pre(z)); }

    Vec forward(const Vec& z) const {
        require_dim(z, 2 * d + 2, "KillLast");
        Vec y = z;
        y(2 * d + 1) -= 2.0 * anchor * h(z);
        return y;
    }
    Vec inverse(const Vec& y) const {
        require_dim(y, 2 * d + 2, "KillLast");
        Vec z = y;
        z(2 * d + 1) += 2.0 * anchor * h(y);
        return z;
    }
    Mat jacobian(const Vec& z) const {
        require_dim(z, 2 * d + 2, "KillLast");
        Mat J = Mat::Identity(2 * d + 2, 2 * d + 2);
        double s = relu_d(pre(z));
        if (s == 0.0) return J;
        for (int j = 0; j < d; ++j) {
            J(2 * d + 1, j) = -2.0 * anchor * s * hat_l1_d(a1(z, j)) * 2.0 / delta;
            J(2 * d + 1, j + d + 1) = -2.0 * anchor * s * hat_l2_d(a1(z, j + d + 1)) * 2.0 / delta;
        }
        return J;
    }
    Mat inverse_jacobian(const Vec& y) const { return detail::unipotent_inverse(jacobian(inverse(y))); }

    Vec field(const Vec& z) const {
        Vec f = Vec::Zero(2 * d + 2);
        f(2 * d + 1) = -2.0 * anchor * h(z);
        return f;
    }

    double bound() const { return stated_bound; }
    double inverse_bound() const { return stated_bound; }
    // Sharp bound from the gate slopes.
    double sharp_bound() const { return 1.0 + 2.0 * std::abs(anchor) * std::sqrt(5.0 * d) / delta; }
};

using FlowLayer = std::variant<ShiftLast, LocalizedTranslate, LocalizedShift, LocalizedLast, PerCoordinatePWL,
                               AffineCoupling, Lift, Project, CopyBlock, KillLast>;

template <class L>
concept HasField = requires(const L& l, const Vec& x) { l.field(x); };

inline std::string layer_name(const FlowLayer& layer) {
    return std::visit(
        [](const auto& l) -> std::string {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ShiftLast>)
                return l.lifted ? "lifted.shift_last" : "shift_last";
            else if constexpr (std::is_same_v<L, LocalizedTranslate>)
                return l.lifted ? "lifted.localized_translate" : "localized_translate";
            else if constexpr (std::is_same_v<L, LocalizedShift>)
                return "localized_shift";
            else if constexpr (std::is_same_v<L, LocalizedLast>)
                return "localized_last";
            else if constexpr (std::is_same_v<L, PerCoordinatePWL>)
                return "per_coordinate_pwl";
            else if constexpr (std::is_same_v<L, AffineCoupling>)
                return "affine_coupling";
            else if constexpr (std::is_same_v<L, Lift>)
                return "lifted.lift";
            else if constexpr (std::is_same_v<L, Project>)
                return "lifted.project";
            else if constexpr (std::is_same_v<L, CopyBlock>)
                return "lifted.copy";
            else
                return "lifted.kill_last";
        },
        layer);
}

inline int layer_in_dim(const FlowLayer& l) { return std::visit([](const auto& x) { return x.in_dim(); }, l); }
inline int layer_out_dim(const FlowLayer& l) { return std::visit([](const auto& x) { return x.out_dim(); }, l); }

inline Vec layer_forward(const FlowLayer& l, const Vec& x) {
    return std::visit([&](const auto& v) { return v.forward(x); }, l);
}
inline Vec layer_inverse(const FlowLayer& l, const Vec& y) {
    return std::visit([&](const auto& v) { return v.inverse(y); }, l);
}
inline Mat layer_jacobian(const FlowLayer& l, const Vec& x) {
    return std::visit([&](const auto& v) { return v.jacobian(x); }, l);
}
inline Mat layer_inverse_jacobian(const FlowLayer& l, const Vec& y) {
    return std::visit([&](const auto& v) { return v.inverse_jacobian(y); }, l);
}
inline double layer_bound(const FlowLayer& l) {
    return std::visit([](const auto& v) { return v.bound(); }, l);
}
inline double layer_inverse_bound(const FlowLayer& l) {
    return std::visit([](const auto& v) { return v.inverse_bound(); }, l);
}
inline bool layer_has_field(const FlowLayer& l) {
    return std::visit([](const auto& v) { return HasField<std::decay_t<decltype(v)>>; }, l);
}
inline Vec layer_field(const FlowLayer& l, const Vec& x) {
    return std::visit(
        [&](const auto& v) -> Vec {
            if constexpr (HasField<std::decay_t<decltype(v)>>)
                return v.field(x);
            else
                throw Error("layer has no defining vector field");
        },
        l);
}

// Determinant-one variants: Jacobian is identity plus a strictly off-diagonal part.
inline bool layer_unipotent(const FlowLayer& l) {
    return std::holds_alternative<ShiftLast>(l) || std::holds_alternative<LocalizedTranslate>(l) ||
           std::holds_alternative<LocalizedShift>(l) || std::holds_alternative<LocalizedLast>(l) ||
           std::holds_alternative<CopyBlock>(l) || std::holds_alternative<KillLast>(l);
}

inline json mlp_to_json(const Mlp& m) {
    std::vector<double> p(m.param_count());
    m.pack(p.data());
    return json{{"widths", m.widths()}, {"params", p}};
}

inline Mlp mlp_from_json(const json& j) {
    Mlp m(j.at("widths").get<std::vector<int>>());
    auto p = j.at("params").get<std::vector<double>>();
    require(p.size() == m.param_count(), "mlp: parameter count mismatch");
    m.unpack(p.data());
    return m;
}

inline json layer_to_json(const FlowLayer& layer) {
    json p = std::visit(
        [](const auto& l) -> json {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ShiftLast>)
                return {{"n", l.n}, {"dim", l.dim}, {"sources", l.sources}};
            else if constexpr (std::is_same_v<L, LocalizedTranslate>)
                return {{"dim", l.dim},       {"gate", l.gate},
                        {"center", l.center}, {"scale", l.scale},
                        {"disp", detail::to_std(l.disp)}};
            else if constexpr (std::is_same_v<L, LocalizedShift>)
                return {{"dim", l.dim},     {"target", l.target}, {"anchor", l.anchor}, {"center", l.center},
                        {"delta", l.delta}, {"shift", l.shift},   {"eps", l.eps}};
            else if constexpr (std::is_same_v<L, LocalizedLast>)
                return {{"dim", l.dim}, {"gate", l.gate}, {"center", l.center}, {"delta", l.delta}, {"disp", l.disp}};
            else if constexpr (std::is_same_v<L, PerCoordinatePWL>)
                return {{"n", l.net.n()}, {"r", l.net.r()}, {"dim", l.dim}};
            else if constexpr (std::is_same_v<L, AffineCoupling>)
                return {{"dim", l.block.dim()},
                        {"s_max", l.block.s_max()},
                        {"scale_net", mlp_to_json(l.block.scale_net())},
                        {"shift_net", mlp_to_json(l.block.shift_net())}};
            else if constexpr (std::is_same_v<L, Lift>)
                return {{"d", l.d}};
            else if constexpr (std::is_same_v<L, Project>)
                return {{"d", l.d}, {"tol", l.tol}};
            else if constexpr (std::is_same_v<L, CopyBlock>)
                return {{"d", l.d}};
            else
                return {{"d", l.d},
                        {"center", detail::to_std(l.center)},
                        {"delta", l.delta},
                        {"anchor", l.anchor},
                        {"stated_bound", l.stated_bound}};
        },
        layer);
    return json{{"variant", layer_name(layer)}, {"params", p}};
}

inline FlowLayer layer_from_json(const json& j) {
    const std::string v = j.at("variant").get<std::string>();
    const json& p = j.at("params");
    if (v == "shift_last" || v == "lifted.shift_last") {
        ShiftLast l{p.at("n"), p.at("dim"), p.at("sources"), v != "shift_last"};
        require(l.n >= 2 && l.sources < l.dim, "shift_last: bad parameters");
        return l;
    }
    if (v == "localized_translate" || v == "lifted.localized_translate") {
        LocalizedTranslate l;
        l.dim = p.at("dim");
        l.gate = p.at("gate");
        l.center = p.at("center");
        l.scale = p.at("scale");
        l.disp = detail::from_std(p.at("disp").get<std::vector<double>>());
        l.lifted = v != "localized_translate";
        require(l.gate >= l.disp.size() && l.gate < l.dim, "localized_translate: bad gate");
        return l;
    }
    if (v == "localized_shift")
        return LocalizedShift{p.at("dim"),    p.at("target"), p.at("anchor"), p.at("center"),
                              p.at("delta"), p.at("shift"),  p.at("eps")};
    if (v == "localized_last")
        return LocalizedLast{p.at("dim"), p.at("gate"), p.at("center"), p.at("delta"), p.at("disp")};
    if (v == "per_coordinate_pwl") return PerCoordinatePWL{PwlNet(p.at("n"), p.at("r")), p.at("dim")};
    if (v == "affine_coupling") {
        AffineCouplingBlock b(p.at("dim"), 1, p.at("s_max"));
        b.scale_net() = mlp_from_json(p.at("scale_net"));
        b.shift_net() = mlp_from_json(p.at("shift_net"));
        return AffineCoupling{std::move(b)};
    }
    if (v == "lifted.lift") return Lift{p.at("d")};
    if (v == "lifted.project") return Project{p.at("d"), p.value("tol", 1e-9)};
    if (v == "lifted.copy") return CopyBlock{p.at("d")};
    if (v == "lifted.kill_last") {
        KillLast l;
        l.d = p.at("d");
        l.center = detail::from_std(p.at("center").get<std::vector<double>>());
        l.delta = p.at("delta");
        l.anchor = p.at("anchor");
        l.stated_bound = p.at("stated_bound");
        require(l.center.size() == 2 * l.d + 2, "lifted.kill_last: center length");
        return l;
    }
    throw Error("unknown layer variant '" + v + "'");
}

}  // namespace binn
