#include "leafid/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

namespace leafid {

namespace {

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double stable_pair_loss(double z, int y) { return y == 1 ? softplus(-z) : softplus(z); }

struct HeadGrad {
    Eigen::VectorXd w;
    double b = 0.0;
    void init(int m) {
        w = Eigen::VectorXd::Zero(m);
        b = 0.0;
    }
    void set_zero() {
        w.setZero();
        b = 0.0;
    }
};

}  // namespace

void TrainConfig::validate() const {
    if (num_epochs < 0) throw usage_error("num_epochs must be >= 0");
    if (batch_size < 1) throw usage_error("batch_size must be >= 1");
    if (learning_rate < 0.0) throw usage_error("learning_rate must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw usage_error("momentum must be in [0,1)");
    if (lr_halve_every < 1) throw usage_error("lr_halve_every must be >= 1");
    if (workers < 0) throw usage_error("workers must be >= 0");
}

TrainResult train(SiameseModel& model, const std::vector<PairRef>& pairs, const ViewCache& views,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (pairs.empty()) throw validation_error("train: no pairs");
    if (!cfg.backbone_id.empty() && cfg.backbone_id != model.config.id)
        throw usage_error("train: config backbone_id '" + cfg.backbone_id +
                          "' does not match model backbone '" + model.config.id + "'");

    TrainResult result;
    if (cfg.num_epochs == 0) return result;

    // Per-channel means over the distinct training images of this view.
    std::set<std::string> ids;
    for (const auto& p : pairs) {
        ids.insert(p.left_id);
        ids.insert(p.right_id);
    }
    {
        double sum[3] = {0, 0, 0};
        std::size_t count = 0;
        for (const auto& id : ids) {
            const Image& img = views.view(id, model.view_tag);
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x) {
                    const auto* px = img.px(y, x);
                    sum[0] += px[0];
                    sum[1] += px[1];
                    sum[2] += px[2];
                }
            count += static_cast<std::size_t>(img.height) * img.width;
        }
        for (int c = 0; c < 3; ++c)
            model.channel_means[c] = static_cast<float>(sum[c] / (255.0 * static_cast<double>(count)));
    }

    // Normalized inputs, one per distinct sample.
    std::map<std::string, nn::Mat<float>> inputs;
    for (const auto& id : ids) inputs.emplace(id, normalize_input(model, views.view(id, model.view_tag)));

    const int m_dim = model.config.embed_dim;
    nn::Gradients<float> velocity;
    velocity.init_like(model.params);
    Eigen::VectorXf head_vel = Eigen::VectorXf::Zero(m_dim);
    float head_b_vel = 0.0f;

    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int n_workers = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::min(4u, hw));

    struct WorkerState {
        nn::Workspace<float> ws_left, ws_right;
        nn::Gradients<float> grads;
        HeadGrad head;
    };
    std::vector<WorkerState> workers(n_workers);
    for (auto& w : workers) {
        w.grads.init_like(model.params);
        w.head.init(m_dim);
    }

    BatchIterator batcher(pairs.size(), static_cast<std::size_t>(cfg.batch_size), cfg.seed);
    std::size_t iteration = 0;

    for (int epoch = 0; epoch < cfg.num_epochs; ++epoch) {
        auto batches = batcher.epoch_batches(static_cast<std::size_t>(epoch));
        double epoch_loss_sum = 0.0;
        std::size_t epoch_pairs = 0;

        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            const std::size_t n = batch.size();
            std::vector<double> losses(n, 0.0);

            auto run_chunk = [&](int wi, std::size_t begin, std::size_t end) {
                WorkerState& st = workers[wi];
                st.grads.set_zero();
                st.head.set_zero();
                for (std::size_t j = begin; j < end; ++j) {
                    const PairRef& pr = pairs[batch[j]];
                    const auto& xl = inputs.at(pr.left_id);
                    const auto& xr = inputs.at(pr.right_id);
                    const auto& fl = nn::backbone_forward(model.config, model.params, xl, st.ws_left);
                    const auto& fr = nn::backbone_forward(model.config, model.params, xr, st.ws_right);

                    Eigen::VectorXf diff = fl - fr;
                    Eigen::VectorXf v = diff.cwiseAbs();
                    double z = static_cast<double>(model.head_b);
                    for (int k = 0; k < m_dim; ++k)
                        z += static_cast<double>(model.head_w[k]) * static_cast<double>(v[k]);
                    const int y = pr.label;
                    losses[j] = stable_pair_loss(z, y);

                    const double dz = 1.0 / (1.0 + std::exp(-z)) - static_cast<double>(y);
                    st.head.w += dz * v.cast<double>();
                    st.head.b += dz;

                    Eigen::VectorXf d_fl(m_dim);
                    for (int k = 0; k < m_dim; ++k) {
                        const float sgn = diff[k] > 0.0f ? 1.0f : (diff[k] < 0.0f ? -1.0f : 0.0f);
                        d_fl[k] = static_cast<float>(dz) * model.head_w[k] * sgn;
                    }
                    nn::backbone_backward(model.config, model.params, xl, st.ws_left, d_fl, st.grads);
                    Eigen::VectorXf d_fr = -d_fl;
                    nn::backbone_backward(model.config, model.params, xr, st.ws_right, d_fr, st.grads);
                }
            };

            const int used = static_cast<int>(std::min<std::size_t>(n_workers, n));
            const std::size_t chunk = (n + used - 1) / used;
            std::vector<std::thread> threads;
            for (int wi = 1; wi < used; ++wi) {
                std::size_t b = wi * chunk, e = std::min(n, b + chunk);
                if (b < e) threads.emplace_back(run_chunk, wi, b, e);
            }
            run_chunk(0, 0, std::min(n, chunk));
            for (auto& t : threads) t.join();

            // Fixed-order reduction keeps results identical per worker count.
            for (int wi = 1; wi < used; ++wi) {
                workers[0].grads.add(workers[wi].grads);
                workers[0].head.w += workers[wi].head.w;
                workers[0].head.b += workers[wi].head.b;
            }

            double batch_loss = 0.0;
            for (double l : losses) batch_loss += l;
            if (!std::isfinite(batch_loss))
                throw numeric_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                    " batch " + std::to_string(bi));
            epoch_loss_sum += batch_loss;
            epoch_pairs += n;

            const double lr = cfg.learning_rate *
                              std::pow(0.5, static_cast<double>(iteration / static_cast<std::size_t>(cfg.lr_halve_every)));
            const float scale = static_cast<float>(1.0 / static_cast<double>(n));
            workers[0].grads.scale(scale);

            const float mom = static_cast<float>(cfg.momentum);
            const float lrf = static_cast<float>(lr);
            const int frozen = model.config.frozen_blocks;
            auto upd = [&](float* p, const float* g, float* v, std::size_t cnt) {
                for (std::size_t k = 0; k < cnt; ++k) {
                    v[k] = mom * v[k] - lrf * g[k];
                    p[k] += v[k];
                }
            };
            for (std::size_t blk = 0; blk < model.params.conv_w.size(); ++blk) {
                if (static_cast<int>(blk) < frozen) continue;
                upd(model.params.conv_w[blk].data(), workers[0].grads.g.conv_w[blk].data(),
                    velocity.g.conv_w[blk].data(), model.params.conv_w[blk].size());
                upd(model.params.conv_b[blk].data(), workers[0].grads.g.conv_b[blk].data(),
                    velocity.g.conv_b[blk].data(), model.params.conv_b[blk].size());
            }
            upd(model.params.dense_w.data(), workers[0].grads.g.dense_w.data(),
                velocity.g.dense_w.data(), model.params.dense_w.size());
            upd(model.params.dense_b.data(), workers[0].grads.g.dense_b.data(),
                velocity.g.dense_b.data(), model.params.dense_b.size());

            for (int k = 0; k < m_dim; ++k) {
                const float g = static_cast<float>(workers[0].head.w[k] / static_cast<double>(n));
                head_vel[k] = mom * head_vel[k] - lrf * g;
                model.head_w[k] = std::min(0.0f, model.head_w[k] + head_vel[k]);
            }
            {
                const float g = static_cast<float>(workers[0].head.b / static_cast<double>(n));
                head_b_vel = mom * head_b_vel - lrf * g;
                model.head_b += head_b_vel;
            }
            ++iteration;
        }
        result.epoch_mean_loss.push_back(epoch_loss_sum / static_cast<double>(epoch_pairs));
    }

    model.invalidate_fingerprint();
    return result;
}

void save_loss_trace(const TrainResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write loss trace: " + path);
    out << "epoch,mean_loss\n";
    for (std::size_t i = 0; i < result.epoch_mean_loss.size(); ++i)
        out << i << ',' << result.epoch_mean_loss[i] << '\n';
}

}  // namespace leafid
