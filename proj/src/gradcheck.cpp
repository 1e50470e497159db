#include "leafid/gradcheck.hpp"

namespace leafid {

namespace {

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

nn::Mat<double> normalize_double(const SiameseModel& model, const Image& img) {
    nn::Mat<double> in(3, static_cast<Eigen::Index>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.px(y, x);
            const Eigen::Index col = static_cast<Eigen::Index>(y) * img.width + x;
            for (int c = 0; c < 3; ++c)
                in(c, col) = p[c] / 255.0 - static_cast<double>(model.channel_means[c]);
        }
    return in;
}

struct DoubleTwin {
    nn::BackboneConfig cfg;
    nn::BackboneParams<double> params;
    Eigen::VectorXd head_w;
    double head_b;

    double loss(const nn::Mat<double>& xl, const nn::Mat<double>& xr, int y) const {
        nn::Workspace<double> wl, wr;
        const auto& fl = nn::backbone_forward(cfg, params, xl, wl);
        const auto& fr = nn::backbone_forward(cfg, params, xr, wr);
        double z = head_b + head_w.dot((fl - fr).cwiseAbs());
        return y == 1 ? softplus(-z) : softplus(z);
    }
};

}  // namespace

GradCheckResult gradient_check(const SiameseModel& model, const Image& left, const Image& right,
                               int label, double epsilon) {
    if (epsilon <= 0.0) throw usage_error("gradient_check: epsilon must be > 0");
    if (label != 0 && label != 1) throw usage_error("gradient_check: label must be 0 or 1");

    DoubleTwin twin;
    twin.cfg = model.config;
    twin.params = model.params.cast<double>();
    twin.head_w = model.head_w.cast<double>();
    twin.head_b = static_cast<double>(model.head_b);

    nn::Mat<double> xl = normalize_double(model, left);
    nn::Mat<double> xr = normalize_double(model, right);

    // Analytic gradients via the shared backward path.
    nn::Workspace<double> wl, wr;
    const auto fl = nn::backbone_forward(twin.cfg, twin.params, xl, wl);
    const auto fr = nn::backbone_forward(twin.cfg, twin.params, xr, wr);
    Eigen::VectorXd diff = fl - fr;
    Eigen::VectorXd v = diff.cwiseAbs();
    double z = twin.head_b + twin.head_w.dot(v);
    double dz = 1.0 / (1.0 + std::exp(-z)) - static_cast<double>(label);

    Eigen::VectorXd g_head_w = dz * v;
    double g_head_b = dz;

    nn::Gradients<double> grads;
    grads.init_like(twin.params);
    Eigen::VectorXd d_fl(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double sgn = diff[i] > 0.0 ? 1.0 : (diff[i] < 0.0 ? -1.0 : 0.0);
        d_fl[i] = dz * twin.head_w[i] * sgn;
    }
    nn::backbone_backward(twin.cfg, twin.params, xl, wl, d_fl, grads);
    Eigen::VectorXd d_fr = -d_fl;
    nn::backbone_backward(twin.cfg, twin.params, xr, wr, d_fr, grads);

    auto rel_err = [](double a, double n) {
        double denom = std::max({std::abs(a), std::abs(n), 1e-10});
        return std::abs(a - n) / denom;
    };

    GradCheckResult res;

    auto fd_check = [&](double* param, double analytic, double& slot) {
        const double orig = *param;
        *param = orig + epsilon;
        const double lp = twin.loss(xl, xr, label);
        *param = orig - epsilon;
        const double lm = twin.loss(xl, xr, label);
        *param = orig;
        const double numeric = (lp - lm) / (2.0 * epsilon);
        slot = std::max(slot, rel_err(analytic, numeric));
    };

    for (Eigen::Index i = 0; i < twin.head_w.size(); ++i)
        fd_check(&twin.head_w[i], g_head_w[i], res.head_max_rel);
    fd_check(&twin.head_b, g_head_b, res.head_max_rel);

    nn::visit_params(twin.params, [&](double* data, std::size_t n, int blk) {
        const double* g = nullptr;
        if (blk >= 0) {
            g = (data == twin.params.conv_w[blk].data()) ? grads.g.conv_w[blk].data()
                                                         : grads.g.conv_b[blk].data();
        } else {
            g = (data == twin.params.dense_w.data()) ? grads.g.dense_w.data()
                                                     : grads.g.dense_b.data();
        }
        for (std::size_t i = 0; i < n; ++i) fd_check(&data[i], g[i], res.backbone_max_rel);
    });

    return res;
}

}  // namespace leafid
